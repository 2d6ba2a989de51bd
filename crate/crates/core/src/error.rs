use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::expr::{EvalError, ParseError, SpaceError};
use crate::exterior::FormError;
use crate::invariants::InvariantError;
use crate::systems::SystemError;

/// Umbrella error for callers that do not care which layer failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}
