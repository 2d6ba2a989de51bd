//! Velocity field of a well-posed form and trajectory integration.
//!
//! At each point the spatial equation `i_v R = -S` is the square linear
//! system `A v = a`: column `j` of `A` is `i_{e_j} R` written in the
//! increasing-index basis of spatial p-forms and `a` is `-S` in the same basis.

mod integrator;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::expr::{EvalError, SpaceSpec};
use crate::exterior::{binomial, increasing_tuples, CompiledForm, Form, FormError};
use crate::linalg::Lu;
use crate::wellposed::{analyze, Analysis, SamplingSpec, WellPosednessReport};

pub use integrator::{IntegratorOptions, IntegratorStats, Method, Trajectory};

/// Condition numbers above this abort the solve.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance of the `i_v S = 0` consistency check.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("sigma is not well posed: {0}")]
    NotWellPosed(String),
    #[error("contraction map is not square: C({n},{p}) = {rows} rows for {n} unknowns")]
    NonSquare { n: usize, p: usize, rows: usize },
    #[error("singular system at {point:?} (condition estimate {condition:e})")]
    Singular { point: Vec<f64>, condition: f64 },
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
    #[error("i_v S = 0 violated at {point:?}: residual {residual:e}")]
    Constraint { point: Vec<f64>, residual: f64 },
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit of {0} reached")]
    MaxSteps(usize),
    #[error("state has {found} components, expected a multiple of {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid integrator option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// An entry of `A`: coefficient `term` of `R`, times `sign`, lands at `(row, col)`.
#[derive(Debug, Clone, Copy)]
struct Slot {
    term: usize,
    row: usize,
    col: usize,
    sign: f64,
}

/// Right-hand side `v(t, x)` of the vortex-lines flow `gamma' = d/dt + v`.
#[derive(Debug, Clone)]
pub struct VortexDynamics {
    space: SpaceSpec,
    p: usize,
    r_cap: Form,
    s_cap: Form,
    r_compiled: CompiledForm,
    s_compiled: CompiledForm,
    slots: Vec<Slot>,
    s_rows: Vec<usize>,
    report: Option<WellPosednessReport>,
}

impl VortexDynamics {
    /// Dynamics of an analyzed form; the verdict must be well-posed.
    pub fn new(analysis: &Analysis) -> Result<Self, DynamicsError> {
        if !analysis.report.is_well_posed() {
            let reasons: Vec<&str> = analysis.report.reasons.iter().map(|r| r.describe()).collect();
            return Err(DynamicsError::NotWellPosed(reasons.join(", ")));
        }
        let mut dynamics = Self::from_spatial_forms(&analysis.r_cap, &analysis.s_cap)?;
        dynamics.report = Some(analysis.report.clone());
        Ok(dynamics)
    }

    /// Analyze `sigma` and build its dynamics.
    pub fn from_sigma(sigma: &Form, sampling: &SamplingSpec) -> Result<Self, DynamicsError> {
        Self::new(&analyze(sigma, sampling)?)
    }

    /// Build directly from `R` (degree p+1) and `S` (degree p) without a rank
    /// check. The map `v -> i_v R` must still be square.
    pub fn from_spatial_forms(r_cap: &Form, s_cap: &Form) -> Result<Self, DynamicsError> {
        r_cap.check_space(s_cap)?;
        if !r_cap.is_spatial() || !s_cap.is_spatial() {
            return Err(FormError::NotSpatial.into());
        }
        let space = r_cap.space().clone();
        let n = space.n();
        let p = s_cap.degree();
        if r_cap.degree() != p + 1 {
            return Err(FormError::DegreeMismatch {
                expected: p + 1,
                found: r_cap.degree(),
            }
            .into());
        }
        let rows = binomial(n, p);
        if rows != n || p == 0 {
            return Err(DynamicsError::NonSquare { n, p, rows });
        }
        let basis = increasing_tuples(1, n, p);
        let row_of: BTreeMap<&[usize], usize> =
            basis.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
        let r_compiled = r_cap.compile();
        let s_compiled = s_cap.compile();
        let mut slots = Vec::new();
        for (term, key) in r_compiled.keys().iter().enumerate() {
            for (r, &j) in key.iter().enumerate() {
                let mut rest = key.clone();
                rest.remove(r);
                slots.push(Slot {
                    term,
                    row: row_of[rest.as_slice()],
                    col: j - 1,
                    sign: if r % 2 == 1 { -1.0 } else { 1.0 },
                });
            }
        }
        let s_rows = s_compiled.keys().iter().map(|k| row_of[k.as_slice()]).collect();
        Ok(Self {
            space,
            p,
            r_cap: r_cap.clone(),
            s_cap: s_cap.clone(),
            r_compiled,
            s_compiled,
            slots,
            s_rows,
            report: None,
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// Degree of the underlying sigma.
    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn r_cap(&self) -> &Form {
        &self.r_cap
    }

    pub fn s_cap(&self) -> &Form {
        &self.s_cap
    }

    pub fn report(&self) -> Option<&WellPosednessReport> {
        self.report.as_ref()
    }

    fn extended_point(t: f64, x: &[f64]) -> Vec<f64> {
        let mut point = Vec::with_capacity(x.len() + 1);
        point.push(t);
        point.extend_from_slice(x);
        point
    }

    /// The matrix `A` and vector `a = -S` at `(t, x)`.
    pub fn linear_system(&self, t: f64, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>), DynamicsError> {
        let n = self.n();
        if x.len() != n {
            return Err(DynamicsError::Dimension {
                expected: n,
                found: x.len(),
            });
        }
        let point = Self::extended_point(t, x);
        let mut stack = Vec::new();
        let mut r_vals = Vec::new();
        let mut s_vals = Vec::new();
        let eval_err = |source| DynamicsError::Eval {
            point: point.clone(),
            source,
        };
        self.r_compiled
            .eval_into(&point, &mut r_vals, &mut stack)
            .map_err(eval_err)?;
        self.s_compiled
            .eval_into(&point, &mut s_vals, &mut stack)
            .map_err(eval_err)?;
        let mut a = vec![vec![0.0; n]; n];
        for slot in &self.slots {
            a[slot.row][slot.col] += slot.sign * r_vals[slot.term];
        }
        let mut rhs = vec![0.0; n];
        for (&row, v) in self.s_rows.iter().zip(&s_vals) {
            rhs[row] = -v;
        }
        Ok((a, rhs))
    }

    /// Spatial velocity `v` solving `i_v R = -S` at `(t, x)`.
    pub fn velocity_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let (a, rhs) = self.linear_system(t, x)?;
        let lu = Lu::new(&a);
        let condition = lu.condition_1(&a);
        if !(condition <= MAX_CONDITION) {
            return Err(DynamicsError::Singular {
                point: Self::extended_point(t, x),
                condition,
            });
        }
        lu.solve(&rhs).ok_or_else(|| DynamicsError::Singular {
            point: Self::extended_point(t, x),
            condition,
        })
    }

    /// Largest component of `i_v S` relative to `1 + |S| |v|`. Zero for an
    /// exact solution of `i_v R = -S`.
    pub fn constraint_residual(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64, DynamicsError> {
        let point = Self::extended_point(t, x);
        let mut stack = Vec::new();
        let mut s_vals = Vec::new();
        self.s_compiled
            .eval_into(&point, &mut s_vals, &mut stack)
            .map_err(|source| DynamicsError::Eval {
                point: point.clone(),
                source,
            })?;
        let mut contracted: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (key, &c) in self.s_compiled.keys().iter().zip(&s_vals) {
            for (r, &j) in key.iter().enumerate() {
                let mut rest = key.clone();
                rest.remove(r);
                let sign = if r % 2 == 1 { -1.0 } else { 1.0 };
                *contracted.entry(rest).or_default() += sign * v[j - 1] * c;
            }
        }
        let s_max = s_vals.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let v_max = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let worst = contracted.values().fold(0.0f64, |m, c| m.max(c.abs()));
        Ok(worst / (1.0 + s_max * v_max))
    }

    /// Right-hand side for several points stacked into one state vector.
    pub fn stacked_velocity(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        let n = self.n();
        if !y.len().is_multiple_of(n) {
            return Err(DynamicsError::Dimension {
                expected: n,
                found: y.len(),
            });
        }
        for (x, o) in y.chunks(n).zip(out.chunks_mut(n)) {
            o.copy_from_slice(&self.velocity_at(t, x)?);
        }
        Ok(())
    }

    fn check_constraint(&self, t: f64, y: &[f64]) -> Result<(), DynamicsError> {
        for x in y.chunks(self.n()) {
            let v = self.velocity_at(t, x)?;
            let residual = self.constraint_residual(t, x, &v)?;
            if residual > CONSTRAINT_TOLERANCE {
                return Err(DynamicsError::Constraint {
                    point: Self::extended_point(t, x),
                    residual,
                });
            }
        }
        Ok(())
    }
}

/// Integrate `gamma' = d/dt + v` from `(t0, x0)` to `t1` (backwards when
/// `t1 < t0`). Failures stop the integration; the samples reached so far
/// are returned with the failure attached.
pub fn integrate_trajectory(
    dynamics: &VortexDynamics,
    x0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Trajectory {
    integrate_bundle(dynamics, &[x0.to_vec()], t0, t1, opts)
}

/// Integrate several initial points as one coupled state with a shared step
/// sequence. The state of the returned trajectory is the concatenation of
/// the individual points.
pub fn integrate_bundle(
    dynamics: &VortexDynamics,
    points: &[Vec<f64>],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Trajectory {
    let y0: Vec<f64> = points.iter().flatten().copied().collect();
    let verify = opts.verify_constraint;
    integrator::solve(
        |t, y, out| dynamics.stacked_velocity(t, y, out),
        |t, y| {
            if verify {
                dynamics.check_constraint(t, y)
            } else {
                Ok(())
            }
        },
        &y0,
        t0,
        t1,
        opts,
    )
}

/// Flow every point from `t0` to `t1` as a shared-step bundle; returns the endpoints.
pub fn advect_points(
    dynamics: &VortexDynamics,
    points: &[Vec<f64>],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let opts = IntegratorOptions {
        sample_times: Some(vec![t1]),
        ..opts.clone()
    };
    let traj = integrate_bundle(dynamics, points, t0, t1, &opts);
    if let Some(e) = traj.failure {
        return Err(e);
    }
    let n = dynamics.n();
    let last = traj
        .states
        .last()
        .ok_or_else(|| DynamicsError::InvalidOption("no samples produced".into()))?;
    Ok(last.chunks(n).map(<[f64]>::to_vec).collect())
}

/// Flow many independent bundles concurrently; results keep input order.
pub fn advect_bundles(
    dynamics: &VortexDynamics,
    bundles: &[Vec<Vec<f64>>],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Vec<Result<Vec<Vec<f64>>, DynamicsError>> {
    bundles
        .par_iter()
        .map(|b| advect_points(dynamics, b, t0, t1, opts))
        .collect()
}
