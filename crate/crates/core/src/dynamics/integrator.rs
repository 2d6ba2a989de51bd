use serde::Serialize;

use super::DynamicsError;

/// Runge-Kutta-Fehlberg 4(5) tableau.
const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -1.0 / 5.0,
    0.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
/// Steps shorter than this fraction of the span abort the integration.
const UNDERFLOW: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive Fehlberg 4(5); the fifth-order solution is propagated.
    Rkf45,
    /// Classic fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub method: Method,
    pub atol: f64,
    pub rtol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Check `i_v S = 0` at every accepted step.
    pub verify_constraint: bool,
    /// Record only these times (hit exactly); `None` records every step.
    pub sample_times: Option<Vec<f64>>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::Rkf45,
            atol: 1e-9,
            rtol: 1e-9,
            initial_step: None,
            max_steps: 1_000_000,
            verify_constraint: cfg!(debug_assertions),
            sample_times: None,
        }
    }
}

impl IntegratorOptions {
    pub fn fixed_rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            ..Self::default()
        }
    }

    /// `count` evenly spaced samples covering `[t0, t1]`, endpoints included.
    pub fn with_uniform_samples(mut self, t0: f64, t1: f64, count: usize) -> Self {
        let count = count.max(2);
        let times = (0..count)
            .map(|i| {
                if i + 1 == count {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / (count - 1) as f64
                }
            })
            .collect();
        self.sample_times = Some(times);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub atol: f64,
    pub rtol: f64,
}

/// Sampled solution curve, ordered by increasing `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
    /// Set when the integration stopped before reaching `t1`.
    pub failure: Option<DynamicsError>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at the largest recorded time.
    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// State at the smallest recorded time.
    pub fn first_state(&self) -> Option<&[f64]> {
        self.states.first().map(Vec::as_slice)
    }

    /// State recorded at exactly time `t`, if any.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.states[i].as_slice())
    }

    /// CSV with header `t,<names>` and one row per sample, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, names: &[String], mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for name in names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{}", crate::format::g17(*t))?;
            for v in x {
                write!(w, ",{}", crate::format::g17(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn initial_step(y: &[f64], f: &[f64], span: f64) -> f64 {
    let d0 = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d1 = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-3
    } else {
        0.01 * d0 / d1
    };
    h.min(span.abs()).max(UNDERFLOW * 10.0 * span.abs())
}

/// Generic driver over `y' = f(t, y)`. `on_accept` runs after every accepted step.
pub(crate) fn solve<F, G>(
    mut rhs: F,
    mut on_accept: G,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Trajectory
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError>,
    G: FnMut(f64, &[f64]) -> Result<(), DynamicsError>,
{
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        stats: IntegratorStats {
            atol: opts.atol,
            rtol: opts.rtol,
            ..Default::default()
        },
        failure: None,
    };
    let span = t1 - t0;
    let dir = if span < 0.0 { -1.0 } else { 1.0 };

    // targets in the direction of integration; t1 always terminates the run
    let mut targets: Vec<f64> = match &opts.sample_times {
        Some(times) => {
            let mut ts: Vec<f64> = times
                .iter()
                .copied()
                .filter(|&s| (s - t0) * dir >= 0.0 && (t1 - s) * dir >= 0.0)
                .collect();
            ts.sort_by(|a, b| (dir * a).total_cmp(&(dir * b)));
            ts.dedup();
            ts
        }
        None => Vec::new(),
    };
    let record_steps = opts.sample_times.is_none();
    let record = |traj: &mut Trajectory, t: f64, y: &[f64]| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
    };
    let finish = |mut traj: Trajectory| {
        if dir < 0.0 {
            traj.times.reverse();
            traj.states.reverse();
        }
        traj
    };

    if record_steps || targets.first() == Some(&t0) {
        record(&mut traj, t0, y0);
    }
    if targets.first() == Some(&t0) {
        targets.remove(0);
    }
    if span == 0.0 {
        if traj.times.is_empty() {
            record(&mut traj, t0, y0);
        }
        return finish(traj);
    }
    if targets.last() != Some(&t1) {
        // integrate to the end even if t1 itself is not requested
        targets.push(t1);
    }
    let t1_requested = record_steps || opts.sample_times.as_ref().is_some_and(|ts| ts.contains(&t1));

    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; dim]; 6];
    let mut stage = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];

    if let Err(e) = rhs(t, &y, &mut k[0]) {
        traj.failure = Some(e);
        return finish(traj);
    }
    traj.stats.rhs_evaluations += 1;

    let (adaptive, mut h) = match opts.method {
        Method::Rkf45 => (
            true,
            opts.initial_step
                .unwrap_or_else(|| initial_step(&y, &k[0], span))
                .abs(),
        ),
        Method::Rk4 { step } => {
            if !(step > 0.0) {
                traj.failure = Some(DynamicsError::InvalidOption(format!(
                    "RK4 step must be positive, got {step}"
                )));
                return finish(traj);
            }
            (false, step)
        }
    };

    let mut target_idx = 0;
    let mut steps = 0usize;
    while target_idx < targets.len() {
        let target = targets[target_idx];
        if steps >= opts.max_steps {
            traj.failure = Some(DynamicsError::MaxSteps(opts.max_steps));
            return finish(traj);
        }
        if adaptive && h < UNDERFLOW * span.abs() {
            traj.failure = Some(DynamicsError::StepUnderflow { t, h: h * dir });
            return finish(traj);
        }
        let remaining = (target - t) * dir;
        let hits = h >= remaining;
        let h_try = if hits { remaining } else { h };
        let hs = h_try * dir;

        let result: Result<f64, DynamicsError> = (|| {
            if adaptive {
                for s in 1..6 {
                    for i in 0..dim {
                        let mut acc = y[i];
                        for (j, kj) in k.iter().enumerate().take(s) {
                            acc += hs * A[s][j] * kj[i];
                        }
                        stage[i] = acc;
                    }
                    rhs(t + C[s] * hs, &stage, &mut k[s])?;
                }
                traj.stats.rhs_evaluations += 5;
                let mut err = 0.0f64;
                for i in 0..dim {
                    let mut hi5 = 0.0;
                    let mut hi4 = 0.0;
                    for s in 0..6 {
                        hi5 += B5[s] * k[s][i];
                        hi4 += B4[s] * k[s][i];
                    }
                    y5[i] = y[i] + hs * hi5;
                    let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                    err = err.max((hs * (hi5 - hi4)).abs() / scale);
                }
                Ok(err)
            } else {
                // classic RK4 reusing the stage buffers
                let half = 0.5 * hs;
                for i in 0..dim {
                    stage[i] = y[i] + half * k[0][i];
                }
                rhs(t + half, &stage, &mut k[1])?;
                for i in 0..dim {
                    stage[i] = y[i] + half * k[1][i];
                }
                rhs(t + half, &stage, &mut k[2])?;
                for i in 0..dim {
                    stage[i] = y[i] + hs * k[2][i];
                }
                rhs(t + hs, &stage, &mut k[3])?;
                traj.stats.rhs_evaluations += 3;
                for i in 0..dim {
                    y5[i] = y[i] + hs / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
                Ok(0.0)
            }
        })();

        let err = match result {
            Ok(e) => e,
            Err(e) => {
                traj.failure = Some(e);
                return finish(traj);
            }
        };
        steps += 1;

        if err > 1.0 {
            traj.stats.rejected += 1;
            h = h_try * (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
            continue;
        }

        let t_new = if hits { target } else { t + hs };
        std::mem::swap(&mut y, &mut y5);
        t = t_new;
        traj.stats.accepted += 1;
        if let Err(e) = rhs(t, &y, &mut k[0]) {
            traj.failure = Some(e);
            return finish(traj);
        }
        traj.stats.rhs_evaluations += 1;
        if let Err(e) = on_accept(t, &y) {
            traj.failure = Some(e);
            return finish(traj);
        }

        if hits {
            target_idx += 1;
            if target != t1 || t1_requested {
                record(&mut traj, t, &y);
            }
        } else if record_steps {
            record(&mut traj, t, &y);
        }

        if adaptive {
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            // a step shortened to land on a target does not shrink the proposal
            h = if hits {
                h.max(h_try * factor)
            } else {
                h_try * factor
            };
        }
    }
    finish(traj)
}
