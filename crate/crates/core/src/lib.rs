//! Vortex-line dynamics of differential forms on extended phase space.
//!
//! A `p`-form `sigma` on `R x R^n` (time first) splits as
//! `sigma = dt ^ s + r`. Its characteristic ("vortex") lines are the curves
//! `t -> (t, x(t))` whose velocity solves `i_v dr = -(ds' - r_t)`, where
//! primes denote spatial exterior derivatives. The crate covers symbolic
//! expressions, exterior calculus, well-posedness checks, trajectory
//! integration and numerical checks of integral invariants.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod exterior;
pub mod format;
pub mod invariants;
pub mod linalg;
pub mod systems;
pub mod wellposed;

pub use error::Error;
pub use expr::{Expr, SpaceSpec};
pub use exterior::{Form, SpatialVector};
pub use wellposed::{analyze, SamplingSpec, Verdict};
