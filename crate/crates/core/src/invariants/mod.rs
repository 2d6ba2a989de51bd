//! Numerical checks of integral invariants and of volume preservation.

mod chain;
mod liouville;
pub mod quadrature;

use rayon::prelude::*;
use serde::Serialize;

pub use chain::{
    advect_chain, parameter_space, tube_chain, Chain, GridNode, NodeSample, FACE_TOLERANCE, STENCIL_STEP,
};
pub use liouville::{check_liouville, volume_form, LiouvilleReport, LiouvilleSample, LIOUVILLE_STEP};
pub use quadrature::{UnitRule, DEFAULT_ORDER};

use crate::dynamics::{DynamicsError, IntegratorOptions, VortexDynamics};
use crate::expr::{EvalError, ParseError};
use crate::exterior::{Form, FormError};
use crate::linalg;
use crate::wellposed::SamplingSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvariantError {
    #[error("form of degree {form} cannot be integrated over a {chain}-chain")]
    DegreeMismatch { form: usize, chain: usize },
    #[error("form and chain live on different spaces")]
    SpaceMismatch,
    #[error("chain is not a cycle")]
    NotACycle,
    #[error("opposite faces along u{axis} differ by {residual:e}")]
    FaceMismatch { axis: usize, residual: f64 },
    #[error("chain is not in the slice t = {t0} (found t = {found})")]
    NotSpatialSlice { t0: f64, found: f64 },
    #[error("grid chain was sampled with order {expected}, requested {found}")]
    QuadratureOrder { expected: usize, found: usize },
    #[error("quadrature order must be positive")]
    InvalidOrder,
    #[error("invariant form has degree {degree} > {max}; it vanishes identically")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("advection failed for the node at parameters {param:?}: {source}")]
    Advection { param: Vec<f64>, source: DynamicsError },
    #[error("no invariant volume form: {0}")]
    NoVolumeForm(String),
    #[error("invalid sample box: {0}")]
    InvalidBox(String),
    #[error("invalid chain: {0}")]
    Chain(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Integrate the `k`-form `a` over the `k`-chain `c` by pulling it back to
/// the parameter cube and applying a tensor Gauss-Legendre rule.
pub fn integrate_over_chain(a: &Form, c: &Chain, order: usize) -> Result<f64, InvariantError> {
    if a.space().n() != c.space().n() {
        return Err(InvariantError::SpaceMismatch);
    }
    if a.degree() != c.dim() {
        return Err(InvariantError::DegreeMismatch {
            form: a.degree(),
            chain: c.dim(),
        });
    }
    let samples = c.samples(order)?;
    let compiled = a.compile();
    let keys = compiled.keys();
    let values = samples
        .par_iter()
        .map(|s| {
            let mut coeffs = Vec::with_capacity(keys.len());
            let mut stack = Vec::new();
            compiled.eval_into(&s.point, &mut coeffs, &mut stack)?;
            let mut total = 0.0;
            for (key, coeff) in keys.iter().zip(&coeffs) {
                if *coeff == 0.0 {
                    continue;
                }
                // rows: tangents; columns: the coordinates in `key`
                let minor: Vec<Vec<f64>> = s
                    .tangents
                    .iter()
                    .map(|t| key.iter().map(|&i| t[i]).collect())
                    .collect();
                total += coeff * minor_det(&minor);
            }
            Ok(s.weight * total)
        })
        .collect::<Result<Vec<f64>, InvariantError>>()?;
    Ok(values.iter().sum())
}

fn minor_det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => linalg::determinant(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvariantKind {
    /// `sigma ^ (d sigma)^k`, conserved over cycles.
    Relative,
    /// `(d sigma)^(k+1)`, conserved over arbitrary chains.
    Absolute,
    /// Phase-space volume.
    Liouville,
}

/// Result of [`invariant_power`]. `overflow` flags a degree above `n + 1`,
/// in which case `form` is the zero form.
#[derive(Debug, Clone)]
pub struct InvariantPower {
    pub form: Form,
    pub degree: usize,
    pub overflow: bool,
}

/// `sigma ^ (d sigma)^k` (relative) or `(d sigma)^(k+1)` (absolute).
pub fn invariant_power(
    sigma: &Form,
    k: usize,
    kind: InvariantKind,
) -> Result<InvariantPower, InvariantError> {
    let p = sigma.degree();
    let degree = match kind {
        InvariantKind::Relative => p + k * (p + 1),
        InvariantKind::Absolute => (k + 1) * (p + 1),
        InvariantKind::Liouville => {
            return Err(InvariantError::Chain("Liouville has no invariant power".into()))
        }
    };
    let max = sigma.space().extended_dim();
    if degree > max {
        return Ok(InvariantPower {
            form: Form::zero(sigma.space(), degree),
            degree,
            overflow: true,
        });
    }
    let dsigma = sigma.d();
    let (mut form, extra) = match kind {
        InvariantKind::Relative => (sigma.clone(), k),
        _ => (dsigma.clone(), k),
    };
    for _ in 0..extra {
        form = form.wedge(&dsigma)?;
    }
    Ok(InvariantPower {
        form,
        degree,
        overflow: false,
    })
}

/// Numerical settings shared by the invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantOptions {
    pub order: usize,
    pub integrator: IntegratorOptions,
    /// Sampling for the well-posedness gate; `None` uses the default box.
    pub sampling: Option<SamplingSpec>,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            integrator: IntegratorOptions::default(),
            sampling: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMetadata {
    pub t0: f64,
    pub t1: f64,
    pub quadrature_order: usize,
    pub nodes: usize,
    pub stencil_step: f64,
    pub atol: f64,
    pub rtol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub kind: InvariantKind,
    pub k: usize,
    pub value_t0: f64,
    pub value_t1: f64,
    pub drift_abs: f64,
    pub drift_rel: f64,
    pub metadata: InvariantMetadata,
}

/// `|v1 - v0| / max(|v0|, |v1|)`, zero when both values vanish.
pub fn relative_drift(v0: f64, v1: f64) -> f64 {
    let scale = v0.abs().max(v1.abs());
    if scale == 0.0 {
        0.0
    } else {
        (v1 - v0).abs() / scale
    }
}

impl InvariantReport {
    pub fn new(
        kind: InvariantKind,
        k: usize,
        value_t0: f64,
        value_t1: f64,
        metadata: InvariantMetadata,
    ) -> Self {
        Self {
            kind,
            k,
            value_t0,
            value_t1,
            drift_abs: (value_t1 - value_t0).abs(),
            drift_rel: relative_drift(value_t0, value_t1),
            metadata,
        }
    }
}

fn dynamics_for(sigma: &Form, opts: &InvariantOptions) -> Result<VortexDynamics, InvariantError> {
    let sampling = opts
        .sampling
        .clone()
        .unwrap_or_else(|| SamplingSpec::default_for(sigma.space().n()));
    Ok(VortexDynamics::from_sigma(sigma, &sampling)?)
}

fn compare_over_flow(
    kind: InvariantKind,
    k: usize,
    spatial: &Form,
    chain: &Chain,
    dynamics: &VortexDynamics,
    t0: f64,
    t1: f64,
    opts: &InvariantOptions,
) -> Result<InvariantReport, InvariantError> {
    if spatial.degree() != chain.dim() {
        return Err(InvariantError::DegreeMismatch {
            form: spatial.degree(),
            chain: chain.dim(),
        });
    }
    // both values use the sampled grid, so an empty flow gives zero drift
    let before = chain.to_grid(opts.order)?;
    let after = advect_chain(&before, dynamics, t0, t1, opts.order, &opts.integrator)?;
    let v0 = integrate_over_chain(spatial, &before, opts.order)?;
    let v1 = integrate_over_chain(spatial, &after, opts.order)?;
    let metadata = InvariantMetadata {
        t0,
        t1,
        quadrature_order: opts.order,
        nodes: opts.order.pow(chain.dim() as u32),
        stencil_step: STENCIL_STEP,
        atol: opts.integrator.atol,
        rtol: opts.integrator.rtol,
    };
    Ok(InvariantReport::new(kind, k, v0, v1, metadata))
}

/// Compare the integral of the spatial part of `sigma ^ (d sigma)^k` over
/// a cycle at `t0` and over its image under the flow at `t1`.
pub fn check_relative_invariant(
    sigma: &Form,
    cycle: &Chain,
    t0: f64,
    t1: f64,
    k: usize,
    opts: &InvariantOptions,
) -> Result<InvariantReport, InvariantError> {
    if !cycle.is_cycle() {
        return Err(InvariantError::NotACycle);
    }
    let power = invariant_power(sigma, k, InvariantKind::Relative)?;
    if power.overflow {
        return Err(InvariantError::DegreeTooHigh {
            degree: power.degree,
            max: sigma.space().extended_dim(),
        });
    }
    let dynamics = dynamics_for(sigma, opts)?;
    let spatial = power.form.spatial_part();
    compare_over_flow(
        InvariantKind::Relative,
        k,
        &spatial,
        cycle,
        &dynamics,
        t0,
        t1,
        opts,
    )
}

/// Compare the integral of the spatial part of `(d sigma)^(k+1)` over a
/// chain at `t0` and over its image at `t1`.
pub fn check_absolute_invariant(
    sigma: &Form,
    chain: &Chain,
    t0: f64,
    t1: f64,
    k: usize,
    opts: &InvariantOptions,
) -> Result<InvariantReport, InvariantError> {
    let power = invariant_power(sigma, k, InvariantKind::Absolute)?;
    if power.overflow {
        return Err(InvariantError::DegreeTooHigh {
            degree: power.degree,
            max: sigma.space().extended_dim(),
        });
    }
    let dynamics = dynamics_for(sigma, opts)?;
    let spatial = power.form.spatial_part();
    compare_over_flow(
        InvariantKind::Absolute,
        k,
        &spatial,
        chain,
        &dynamics,
        t0,
        t1,
        opts,
    )
}

/// `integral of d sigma` over the tube swept by the solutions through the
/// 1-cycle `base` between `t0` and `t1`. Vanishes for vortex lines.
pub fn tube_integral(
    sigma: &Form,
    base: &Chain,
    t0: f64,
    t1: f64,
    opts: &InvariantOptions,
) -> Result<f64, InvariantError> {
    let dynamics = dynamics_for(sigma, opts)?;
    let tube = tube_chain(base, &dynamics, t0, t1, opts.order, &opts.integrator)?;
    integrate_over_chain(&sigma.d(), &tube, opts.order)
}
