mod common;

use common::*;
use proptest::prelude::*;
use vortexlines::dynamics::{integrate_trajectory, IntegratorOptions, VortexDynamics};
use vortexlines::systems::{example4_sigma, hamiltonian_sigma, nambu_sigma, HamiltonianSpec, NambuSpec};
use vortexlines::wellposed::{analyze, check_degree, SamplingSpec, Verdict};

fn dynamics(sigma: &vortexlines::Form) -> VortexDynamics {
    VortexDynamics::from_sigma(sigma, &SamplingSpec::default_for(sigma.space().n())).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn levi_civita_velocity(grads: &[Vec<f64>], n: usize) -> Vec<f64> {
    // x_i' = eps_{i j ... l} d_j H1 ... d_l H_{n-1}
    let mut v = vec![0.0; n];
    for (perm, sign) in permutations(n) {
        let mut term = sign;
        for (slot, grad) in grads.iter().enumerate() {
            term *= grad[perm[slot + 1]];
        }
        v[perm[0]] += term;
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn hamilton_equations(
        (m, h, pts) in (1usize..=3).prop_flat_map(|m| (
            Just(m),
            Poly::strategy(2 * m, true),
            proptest::collection::vec(point_strategy(2 * m), 50),
        ))
    ) {
        let spec = HamiltonianSpec::parse(m, &h.text(&HamiltonianSpec::standard_space(m).unwrap())).unwrap();
        let dynamics = dynamics(&hamiltonian_sigma(&spec).unwrap());
        for p in &pts {
            let v = dynamics.velocity_at(p[0], &p[1..]).unwrap();
            let mut expected = vec![0.0; 2 * m];
            for a in 1..=m {
                expected[a - 1] = h.partial(m + a, p);
                expected[m + a - 1] = -h.partial(a, p);
            }
            prop_assert!(max_gap(&v, &expected) <= 1e-10, "{v:?} vs {expected:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn nambu_equations(
        (n, hs, pts) in (3usize..=5).prop_flat_map(|n| (
            Just(n),
            proptest::collection::vec(Poly::strategy(n, false), n - 1),
            proptest::collection::vec(point_strategy(n), 20),
        ))
    ) {
        let space = NambuSpec::standard_space(n).unwrap();
        let texts: Vec<String> = hs.iter().map(|h| h.text(&space)).collect();
        let sigma = nambu_sigma(&NambuSpec::parse(n, &texts).unwrap()).unwrap();
        let dynamics = dynamics(&sigma);
        for p in &pts {
            let grads: Vec<Vec<f64>> = hs.iter().map(|h| (1..=n).map(|i| h.partial(i, p)).collect()).collect();
            let expected = levi_civita_velocity(&grads, n);
            let v = dynamics.velocity_at(p[0], &p[1..]).unwrap();
            prop_assert!(max_gap(&v, &expected) <= 1e-10, "{v:?} vs {expected:?}");
        }
    }
}

#[test]
fn degree_gate_is_exhaustive() {
    for n in 2..=8 {
        for p in 1..n {
            let expected = (p == 1 && n % 2 == 0) || p == n - 1;
            assert_eq!(check_degree(n, p).passes(), expected, "n={n} p={p}");
        }
    }
}

#[test]
fn example_four_is_rank_two() {
    let a = analyze(&example4_sigma(), &SamplingSpec::default_for(3)).unwrap();
    assert_eq!(a.report.verdict, Verdict::IllPosed);
    assert_eq!(a.report.min_rank(), Some(2));
    assert!(VortexDynamics::new(&a).is_err());
}

#[test]
fn oscillator_energy_is_conserved() {
    let spec = HamiltonianSpec::parse(1, "(q^2 + p^2)/2").unwrap();
    let d = dynamics(&hamiltonian_sigma(&spec).unwrap());
    let x0 = [1.0, 0.5];
    let traj = integrate_trajectory(&d, &x0, 0.0, 10.0, &IntegratorOptions::default());
    assert!(traj.is_complete());
    let energy = |x: &[f64]| (x[0] * x[0] + x[1] * x[1]) / 2.0;
    let e0 = energy(&x0);
    let drift = traj
        .states
        .iter()
        .map(|x| (energy(x) - e0).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-6, "{drift}");
    // exact rotation
    let x = traj.last_state().unwrap();
    let (c, s) = (10f64.cos(), 10f64.sin());
    assert!((x[0] - (x0[0] * c + x0[1] * s)).abs() < 1e-6);
    assert!((x[1] - (x0[1] * c - x0[0] * s)).abs() < 1e-6);
}

#[test]
fn euler_top_conserves_both_hamiltonians() {
    let h1 = "(x^2 + y^2 + z^2)/2";
    let h2 = "x^2/2 + y^2/3 + z^2/5";
    let sigma = nambu_sigma(&NambuSpec::parse(3, &[h1, h2]).unwrap()).unwrap();
    let d = dynamics(&sigma);
    let x0 = [0.3, 0.8, -0.5];
    let traj = integrate_trajectory(&d, &x0, 0.0, 10.0, &IntegratorOptions::default());
    assert!(traj.is_complete());
    let f1 = |x: &[f64]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0;
    let f2 = |x: &[f64]| x[0] * x[0] / 2.0 + x[1] * x[1] / 3.0 + x[2] * x[2] / 5.0;
    for x in &traj.states {
        assert!((f1(x) - f1(&x0)).abs() <= 1e-6);
        assert!((f2(x) - f2(&x0)).abs() <= 1e-6);
    }
}

#[test]
fn time_dependent_hamiltonian_runs_backwards() {
    let spec = HamiltonianSpec::parse(1, "p^2/2 - t*q").unwrap();
    let d = dynamics(&hamiltonian_sigma(&spec).unwrap());
    // q'' = t, from (0,0) at t=0: p = t^2/2, q = t^3/6
    let traj = integrate_trajectory(&d, &[0.0, 0.0], 0.0, -2.0, &IntegratorOptions::default());
    let x = traj.first_state().unwrap();
    assert_eq!(traj.times[0], -2.0);
    assert!((x[0] + 8.0 / 6.0).abs() < 1e-8 && (x[1] - 2.0).abs() < 1e-8);
}
