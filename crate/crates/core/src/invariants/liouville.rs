use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{InvariantError, InvariantKind, InvariantMetadata, InvariantReport};
use crate::dynamics::{advect_points, IntegratorOptions, VortexDynamics};
use crate::exterior::{CompiledForm, Form};
use crate::linalg;

/// Coordinate step of the central-difference flow Jacobian.
pub const LIOUVILLE_STEP: f64 = 1e-4;

/// The invariant top-degree form: `R` itself for `p = n - 1`, `R^m` for
/// `p = 1`, `n = 2m`.
pub fn volume_form(dynamics: &VortexDynamics) -> Result<Form, InvariantError> {
    let n = dynamics.n();
    let p = dynamics.degree();
    let r = dynamics.r_cap();
    let vol = if p + 1 == n {
        r.clone()
    } else if p == 1 && n.is_multiple_of(2) {
        let mut v = r.clone();
        for _ in 1..n / 2 {
            v = v.wedge(r)?;
        }
        v
    } else {
        return Err(InvariantError::NoVolumeForm(format!(
            "degree {p} on {n} dimensions"
        )));
    };
    if vol.is_zero() {
        return Err(InvariantError::NoVolumeForm("the top power vanishes".into()));
    }
    Ok(vol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleSample {
    pub point: Vec<f64>,
    /// Determinant of the flow Jacobian in coordinates.
    pub det_j: Option<f64>,
    /// `det J` weighted by the density of the volume form at both ends;
    /// equals `det J` for constant densities.
    pub volume_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleReport {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub seed: u64,
    pub max_abs_det_minus_one: f64,
    pub failures: usize,
    pub samples: Vec<LiouvilleSample>,
}

impl LiouvilleReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.failures == 0 && self.max_abs_det_minus_one <= tolerance
    }

    pub fn to_invariant_report(&self, atol: f64, rtol: f64) -> InvariantReport {
        let worst = self
            .samples
            .iter()
            .filter_map(|s| s.volume_ratio)
            .max_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
            .unwrap_or(1.0);
        InvariantReport::new(
            InvariantKind::Liouville,
            0,
            1.0,
            worst,
            InvariantMetadata {
                t0: self.t0,
                t1: self.t1,
                quadrature_order: 0,
                nodes: self.samples.len(),
                stencil_step: self.step,
                atol,
                rtol,
            },
        )
    }
}

fn density(vol: &CompiledForm, t: f64, x: &[f64]) -> Result<f64, InvariantError> {
    let mut point = Vec::with_capacity(x.len() + 1);
    point.push(t);
    point.extend_from_slice(x);
    let mut out = Vec::new();
    vol.eval_into(&point, &mut out, &mut Vec::new())?;
    Ok(out.first().copied().unwrap_or(0.0))
}

fn one_sample(
    dynamics: &VortexDynamics,
    vol: &CompiledForm,
    x: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(f64, f64), InvariantError> {
    let n = x.len();
    let h = LIOUVILLE_STEP;
    let mut bundle = vec![x.to_vec()];
    for j in 0..n {
        let mut lo = x.to_vec();
        lo[j] -= h;
        let mut hi = x.to_vec();
        hi[j] += h;
        bundle.push(lo);
        bundle.push(hi);
    }
    let flowed = advect_points(dynamics, &bundle, t0, t1, opts)?;
    // column j of J is d phi / d x_j
    let jac: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (flowed[2 + 2 * j][i] - flowed[1 + 2 * j][i]) / (2.0 * h))
                .collect()
        })
        .collect();
    let det = linalg::determinant(&jac);
    let rho0 = density(vol, t0, x)?;
    if rho0 == 0.0 || !rho0.is_finite() {
        return Err(InvariantError::NoVolumeForm(format!(
            "volume density vanishes at {x:?}"
        )));
    }
    let rho1 = density(vol, t1, &flowed[0])?;
    Ok((det, rho1 * det / rho0))
}

/// Sample `count` points uniformly in the box `[lower, upper]` and compare
/// the transported volume element with the original one.
pub fn check_liouville(
    dynamics: &VortexDynamics,
    lower: &[f64],
    upper: &[f64],
    t0: f64,
    t1: f64,
    count: usize,
    seed: u64,
    opts: &IntegratorOptions,
) -> Result<LiouvilleReport, InvariantError> {
    let n = dynamics.n();
    if lower.len() != n || upper.len() != n {
        return Err(InvariantError::InvalidBox(format!(
            "bounds must have {n} entries"
        )));
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
    {
        return Err(InvariantError::InvalidBox(
            "lower bound exceeds upper bound".into(),
        ));
    }
    let vol = volume_form(dynamics)?.compile();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..b) })
                .collect()
        })
        .collect();
    let samples: Vec<LiouvilleSample> = points
        .into_par_iter()
        .map(|x| match one_sample(dynamics, &vol, &x, t0, t1, opts) {
            Ok((det, ratio)) => LiouvilleSample {
                point: x,
                det_j: Some(det),
                volume_ratio: Some(ratio),
                error: None,
            },
            Err(e) => LiouvilleSample {
                point: x,
                det_j: None,
                volume_ratio: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let failures = samples.iter().filter(|s| s.error.is_some()).count();
    let max_abs_det_minus_one = samples
        .iter()
        .filter_map(|s| s.volume_ratio)
        .map(|r| (r - 1.0).abs())
        .fold(0.0f64, f64::max);
    Ok(LiouvilleReport {
        t0,
        t1,
        step: LIOUVILLE_STEP,
        seed,
        max_abs_det_minus_one,
        failures,
        samples,
    })
}
