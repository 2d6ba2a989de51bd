//! Well-posedness of `i_v R = -S`: the contraction map `v -> i_v R` must be
//! a linear isomorphism from vectors to spatial p-forms. That needs
//! `C(n, p) = n` (so `p = 1` or `p = n - 1`), an even `n` when `p = 1`
//! (closed two-forms have even rank), and full rank of `R` at every point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exterior::{binomial, decompose, form_rank_at, DerivativeMode, Form, FormError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    WellPosed,
    IllPosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    /// `p` outside `1..=n`.
    DegreeOutOfRange,
    /// `C(n, p) != n`.
    DimensionMismatch,
    /// `p = 1` with odd `n`.
    OddSymplecticDimension,
    /// Some sample has rank below `n`.
    RankDeficient,
    /// Some sample could not be evaluated.
    EvaluationFailure,
}

impl Reason {
    pub fn describe(self) -> &'static str {
        match self {
            Reason::DegreeOutOfRange => "degree of sigma outside 1..=n",
            Reason::DimensionMismatch => "C(n,p) differs from n",
            Reason::OddSymplecticDimension => "odd-dimensional symplectic candidate",
            Reason::RankDeficient => "rank of R-hat below n",
            Reason::EvaluationFailure => "coefficient evaluation failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeCheck {
    pub n: usize,
    pub p: usize,
    pub degree_ok: bool,
    pub parity_ok: bool,
    pub reasons: Vec<Reason>,
}

impl DegreeCheck {
    pub fn passes(&self) -> bool {
        self.degree_ok && self.parity_ok
    }
}

/// Dimension and parity test for a `p`-form on an `n`-dimensional phase space.
pub fn check_degree(n: usize, p: usize) -> DegreeCheck {
    let mut reasons = Vec::new();
    let in_range = (1..=n).contains(&p);
    let degree_ok = in_range && binomial(n, p) == n;
    if !in_range {
        reasons.push(Reason::DegreeOutOfRange);
    } else if !degree_ok {
        reasons.push(Reason::DimensionMismatch);
    }
    let parity_ok = !(p == 1 && n % 2 == 1);
    if !parity_ok {
        reasons.push(Reason::OddSymplecticDimension);
    }
    DegreeCheck {
        n,
        p,
        degree_ok,
        parity_ok,
        reasons,
    }
}

/// Where to evaluate the rank of `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleRegion {
    /// `count` uniform points in the box, each paired with every time in `times`.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        count: usize,
        times: Vec<f64>,
    },
    /// Explicit extended points `[t, x1..xn]`.
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    pub seed: u64,
    pub region: SampleRegion,
}

impl SamplingSpec {
    pub const DEFAULT_COUNT: usize = 32;

    /// `[-1, 1]^n`, 32 points, times `{0, 1, pi}`.
    pub fn default_for(n: usize) -> Self {
        Self {
            seed: 0,
            region: SampleRegion::Box {
                lower: vec![-1.0; n],
                upper: vec![1.0; n],
                count: Self::DEFAULT_COUNT,
                times: vec![0.0, 1.0, std::f64::consts::PI],
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_count(mut self, new_count: usize) -> Self {
        if let SampleRegion::Box { count, .. } = &mut self.region {
            *count = new_count;
        }
        self
    }

    pub fn points(points: Vec<Vec<f64>>) -> Self {
        Self {
            seed: 0,
            region: SampleRegion::Points(points),
        }
    }

    /// Extended sample points, deterministic in the seed.
    pub fn generate(&self) -> Vec<Vec<f64>> {
        match &self.region {
            SampleRegion::Points(p) => p.clone(),
            SampleRegion::Box {
                lower,
                upper,
                count,
                times,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let spatial: Vec<Vec<f64>> = (0..*count)
                    .map(|_| {
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                            .collect()
                    })
                    .collect();
                let times: &[f64] = if times.is_empty() { &[0.0] } else { times };
                times
                    .iter()
                    .flat_map(|&t| {
                        spatial.iter().map(move |x| {
                            let mut p = Vec::with_capacity(x.len() + 1);
                            p.push(t);
                            p.extend_from_slice(x);
                            p
                        })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSample {
    pub point: Vec<f64>,
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellPosednessReport {
    pub verdict: Verdict,
    pub n: usize,
    pub p: usize,
    pub degree_ok: bool,
    pub parity_ok: bool,
    pub reasons: Vec<Reason>,
    pub rank_samples: Vec<RankSample>,
    /// First sample whose rank is not `n`.
    pub witness: Option<RankSample>,
}

impl WellPosednessReport {
    /// Assemble a report; the verdict depends only on the degree flags and the ranks.
    pub fn assemble(
        n: usize,
        p: usize,
        degree_ok: bool,
        parity_ok: bool,
        rank_samples: Vec<RankSample>,
    ) -> Self {
        let mut reasons = Vec::new();
        if !degree_ok {
            reasons.push(if (1..=n).contains(&p) {
                Reason::DimensionMismatch
            } else {
                Reason::DegreeOutOfRange
            });
        }
        if !parity_ok {
            reasons.push(Reason::OddSymplecticDimension);
        }
        let witness = rank_samples.iter().find(|s| s.rank != Some(n)).cloned();
        if rank_samples.iter().any(|s| s.rank.is_none()) {
            reasons.push(Reason::EvaluationFailure);
        }
        if rank_samples.iter().any(|s| matches!(s.rank, Some(r) if r != n)) {
            reasons.push(Reason::RankDeficient);
        }
        let verdict = if degree_ok && parity_ok && witness.is_none() {
            Verdict::WellPosed
        } else {
            Verdict::IllPosed
        };
        Self {
            verdict,
            n,
            p,
            degree_ok,
            parity_ok,
            reasons,
            rank_samples,
            witness,
        }
    }

    pub fn is_well_posed(&self) -> bool {
        self.verdict == Verdict::WellPosed
    }

    /// Smallest rank over the evaluated samples.
    pub fn min_rank(&self) -> Option<usize> {
        self.rank_samples.iter().filter_map(|s| s.rank).min()
    }
}

/// `sigma` split into its spatial pieces together with those of `d sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub sigma: Form,
    pub s_hat: Form,
    pub r_hat: Form,
    /// `-d-hat s_hat + dt-partial r_hat`
    pub s_cap: Form,
    /// `d-hat r_hat`
    pub r_cap: Form,
    pub report: WellPosednessReport,
}

/// Spatial pieces `(s_hat, r_hat, S, R)` of `sigma` and `d sigma`.
pub fn spatial_pieces(sigma: &Form) -> Result<(Form, Form, Form, Form), FormError> {
    let dec = decompose(sigma);
    let r_cap = dec.r_hat.exterior_derivative(DerivativeMode::Spatial)?;
    let r_t = dec.r_hat.exterior_derivative(DerivativeMode::Time)?;
    let s_cap = if sigma.degree() == 0 {
        // no s_hat for a function: d f = dt f_t + d-hat f
        r_t
    } else {
        dec.s_hat
            .exterior_derivative(DerivativeMode::Spatial)?
            .neg()
            .add(&r_t)?
    };
    Ok((dec.s_hat, dec.r_hat, s_cap, r_cap))
}

fn rank_sample(r_cap: &Form, n: usize, point: Vec<f64>) -> RankSample {
    let result = if r_cap.degree() == n {
        // a top-degree form has rank n wherever it is nonzero
        let key: Vec<usize> = (1..=n).collect();
        match r_cap.coefficient(&key).map(|c| c.evaluate(&point)) {
            None => Ok(0),
            Some(Ok(v)) if v != 0.0 && v.is_finite() => Ok(n),
            Some(Ok(_)) => Ok(0),
            Some(Err(e)) => Err(FormError::from(e)),
        }
    } else {
        form_rank_at(r_cap, &point)
    };
    match result {
        Ok(rank) => RankSample {
            point,
            rank: Some(rank),
            error: None,
        },
        Err(e) => RankSample {
            point,
            rank: None,
            error: Some(e.to_string()),
        },
    }
}

/// Decompose `sigma`, run the degree test and sample the rank of `R`.
pub fn analyze(sigma: &Form, sampling: &SamplingSpec) -> Result<Analysis, FormError> {
    let n = sigma.space().n();
    let p = sigma.degree();
    let (s_hat, r_hat, s_cap, r_cap) = spatial_pieces(sigma)?;
    let degree = check_degree(n, p);
    let points = sampling.generate();
    let rank_samples: Vec<RankSample> = points
        .into_par_iter()
        .map(|pt| rank_sample(&r_cap, n, pt))
        .collect();
    let report = WellPosednessReport::assemble(n, p, degree.degree_ok, degree.parity_ok, rank_samples);
    Ok(Analysis {
        sigma: sigma.clone(),
        s_hat,
        r_hat,
        s_cap,
        r_cap,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Expr, SpaceSpec};
    use crate::systems::{
        example4_sigma, example4_sigma_with, hamiltonian_sigma, nambu_sigma, HamiltonianSpec, NambuSpec,
    };

    #[test]
    fn degree_examples() {
        let c = check_degree(4, 2);
        assert!(!c.degree_ok);
        assert_eq!(c.reasons, vec![Reason::DimensionMismatch]);
        assert!(check_degree(2, 1).passes());
        let c = check_degree(3, 1);
        assert!(c.degree_ok);
        assert!(!c.parity_ok);
        assert_eq!(c.reasons, vec![Reason::OddSymplecticDimension]);
        assert!(check_degree(3, 2).passes());
        assert_eq!(check_degree(3, 0).reasons, vec![Reason::DegreeOutOfRange]);
        assert_eq!(check_degree(3, 4).reasons, vec![Reason::DegreeOutOfRange]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = SamplingSpec::default_for(3).with_seed(7);
        let a = s.generate();
        assert_eq!(a, s.generate());
        assert_eq!(a.len(), 96);
        assert!(a.iter().all(|p| p.len() == 4));
        assert!(a[..32].iter().all(|p| p[0] == 0.0));
        assert!(a[64..].iter().all(|p| p[0] == std::f64::consts::PI));
        assert_ne!(a, SamplingSpec::default_for(3).with_seed(8).generate());
    }

    #[test]
    fn oscillator_is_well_posed() {
        let spec = HamiltonianSpec::parse(1, "(p^2+q^2)/2").unwrap();
        let a = analyze(&hamiltonian_sigma(&spec).unwrap(), &SamplingSpec::default_for(2)).unwrap();
        assert!(a.report.is_well_posed(), "{:?}", a.report.reasons);
        assert!(a.report.rank_samples.iter().all(|s| s.rank == Some(2)));
        // R = dp^dq, S = d-hat H
        assert_eq!(
            a.r_cap,
            Form::monomial(spec.space(), &[2, 1], Expr::one()).unwrap()
        );
        let point = [0.0, 0.3, -0.4];
        let s = a.s_cap.evaluate(&point).unwrap();
        assert!((s[&vec![1]] - 0.3).abs() < 1e-15);
        assert!((s[&vec![2]] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn nambu_is_well_posed_and_has_expected_pieces() {
        let spec = NambuSpec::parse(3, &["x*y + z^2", "sin(x) + y"]).unwrap();
        let a = analyze(&nambu_sigma(&spec).unwrap(), &SamplingSpec::default_for(3)).unwrap();
        assert!(a.report.is_well_posed());
        assert!(a.report.rank_samples.iter().all(|s| s.rank == Some(3)));
        let space = spec.space();
        assert_eq!(a.r_cap, Form::monomial(space, &[1, 2, 3], Expr::one()).unwrap());
        // S = -dH1 ^ dH2
        let dh: Vec<Form> = spec
            .hamiltonians()
            .iter()
            .map(|h| {
                Form::scalar(space, h.clone())
                    .exterior_derivative(DerivativeMode::Spatial)
                    .unwrap()
            })
            .collect();
        let expected = dh[0].wedge(&dh[1]).unwrap().neg();
        let point = [0.0, 0.2, -0.5, 0.9];
        assert!(a.s_cap.sub(&expected).unwrap().max_abs_at(&point).unwrap() < 1e-15);
    }

    #[test]
    fn example4_is_ill_posed_with_rank_two() {
        let a = analyze(&example4_sigma(), &SamplingSpec::default_for(3)).unwrap();
        let r = &a.report;
        assert_eq!(r.verdict, Verdict::IllPosed);
        assert!(r.degree_ok);
        assert!(!r.parity_ok);
        assert!(r.reasons.contains(&Reason::OddSymplecticDimension));
        assert!(r.reasons.contains(&Reason::RankDeficient));
        assert_eq!(r.witness.as_ref().unwrap().rank, Some(2));
        assert_eq!(r.min_rank(), Some(2));
    }

    #[test]
    fn example4_without_z_is_still_ill_posed() {
        let space = crate::systems::example4_space();
        let h = parse_expression("q^2 + p^2", &space).unwrap();
        let a = analyze(&example4_sigma_with(h).unwrap(), &SamplingSpec::default_for(3)).unwrap();
        assert_eq!(a.report.verdict, Verdict::IllPosed);
        assert_eq!(a.report.min_rank(), Some(2));
    }

    #[test]
    fn evaluation_failures_are_recorded_not_fatal() {
        let s = SpaceSpec::new(&["q", "p"]).unwrap();
        let sigma = Form::monomial(&s, &[1], parse_expression("p*ln(q)", &s).unwrap()).unwrap();
        let sampling = SamplingSpec::points(vec![vec![0.0, 0.5, 0.5], vec![0.0, -0.5, 0.5]]);
        let a = analyze(&sigma, &sampling).unwrap();
        assert_eq!(a.report.rank_samples[0].rank, Some(2));
        assert_eq!(a.report.rank_samples[1].rank, None);
        assert!(a.report.rank_samples[1]
            .error
            .as_deref()
            .unwrap()
            .contains("ln(q)"));
        assert_eq!(a.report.verdict, Verdict::IllPosed);
        assert!(a.report.reasons.contains(&Reason::EvaluationFailure));
    }

    #[test]
    fn verdict_is_a_function_of_flags_and_ranks() {
        let ok = RankSample {
            point: vec![0.0, 0.0, 0.0],
            rank: Some(2),
            error: None,
        };
        let low = RankSample {
            rank: Some(1),
            ..ok.clone()
        };
        let r = WellPosednessReport::assemble(2, 1, true, true, vec![ok.clone(), ok.clone()]);
        assert_eq!(r.verdict, Verdict::WellPosed);
        let r = WellPosednessReport::assemble(2, 1, true, true, vec![ok.clone(), low.clone()]);
        assert_eq!(r.verdict, Verdict::IllPosed);
        assert_eq!(r.witness, Some(low));
        let r = WellPosednessReport::assemble(2, 1, false, true, vec![ok.clone()]);
        assert_eq!(r.verdict, Verdict::IllPosed);
        let r = WellPosednessReport::assemble(2, 1, true, false, vec![ok]);
        assert_eq!(r.verdict, Verdict::IllPosed);
    }
}
