use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vortexlines::dynamics::{integrate_trajectory, IntegratorOptions};
use vortexlines::expr::parse_expression;
use vortexlines::invariants::{check_relative_invariant, Chain, InvariantOptions};
use vortexlines::systems::HamiltonianSpec;
use vortexlines::wellposed::{analyze, SamplingSpec};
use vortexlines_bench::{coupled_sigma, dynamics, top_sigma, COUPLED};

fn expressions(c: &mut Criterion) {
    let space = HamiltonianSpec::standard_space(2).unwrap();
    let h = parse_expression(COUPLED, &space).unwrap();
    let point = [0.1, 0.3, -0.2, 0.5, 0.7];
    c.bench_function("expr/evaluate", |b| {
        b.iter(|| black_box(&h).evaluate(black_box(&point)))
    });
    c.bench_function("expr/differentiate", |b| {
        b.iter(|| black_box(&h).differentiate(1))
    });
}

fn forms(c: &mut Criterion) {
    let sigma = coupled_sigma();
    let d = sigma.d();
    c.bench_function("form/exterior_derivative", |b| b.iter(|| black_box(&sigma).d()));
    c.bench_function("form/wedge", |b| {
        b.iter(|| black_box(&sigma).wedge(black_box(&d)).unwrap())
    });
    c.bench_function("form/analyze", |b| {
        b.iter(|| analyze(black_box(&sigma), &SamplingSpec::default_for(4)).unwrap())
    });
}

fn velocities(c: &mut Criterion) {
    let coupled = dynamics(&coupled_sigma());
    let top = dynamics(&top_sigma());
    c.bench_function("velocity/hamiltonian_m2", |b| {
        b.iter(|| {
            coupled
                .velocity_at(0.0, black_box(&[0.3, -0.2, 0.5, 0.7]))
                .unwrap()
        })
    });
    c.bench_function("velocity/nambu_n3", |b| {
        b.iter(|| top.velocity_at(0.0, black_box(&[0.6, 0.5, 0.4])).unwrap())
    });
}

fn trajectories(c: &mut Criterion) {
    let coupled = dynamics(&coupled_sigma());
    let opts = IntegratorOptions::default();
    c.bench_function("trajectory/rkf45_t10", |b| {
        b.iter(|| integrate_trajectory(&coupled, black_box(&[1.0, 0.2, 0.0, 0.5]), 0.0, 10.0, &opts))
    });
}

fn invariants(c: &mut Criterion) {
    let sigma = coupled_sigma();
    let space = sigma.space().clone();
    let cycle = Chain::parse_spatial(
        &space,
        1,
        &[
            "cos(2*pi*u1)",
            "0.5*cos(2*pi*u1) + 0.2",
            "sin(2*pi*u1)",
            "-0.5*sin(2*pi*u1)",
        ],
        0.0,
        true,
    )
    .unwrap();
    let opts = InvariantOptions::default();
    let mut group = c.benchmark_group("invariants");
    group.sample_size(10);
    group.bench_function("relative_m2", |b| {
        b.iter(|| check_relative_invariant(&sigma, &cycle, 0.0, 1.0, 0, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, expressions, forms, velocities, trajectories, invariants);
criterion_main!(benches);
