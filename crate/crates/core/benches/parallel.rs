//! Sequential versus rayon execution on the grid-shaped hot loops.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magflow::contact::{contact_candidate_min_with, liouville_action_with, Candidate, SmGrid};
use magflow::magnetic::{flux_total, Bump};
use magflow::orbitfind::{discrete_action_gradient_with, oracle_circle, FluxModel, HomogeneousKind};
use magflow::{Execution, MagneticField, MagneticSystem, SurfaceModel};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bump_torus() -> MagneticSystem {
    MagneticSystem::new(
        SurfaceModel::unit_torus(),
        MagneticField::TorusBumps { base: 1.0, bumps: vec![Bump { x0: 0.5, y0: 0.5, amplitude: -2.0, width: 0.28 }] },
    )
    .unwrap()
}

fn contact_grid(c: &mut Criterion) {
    let sys = MagneticSystem::homogeneous(SurfaceModel::hyperbolic_genus(2), 1.0);
    let mut group = c.benchmark_group("contact_candidate 128x64");
    for (name, exec) in MODES {
        let grid = SmGrid { base: 128, fiber: 64, exec: exec.effective() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &grid, |b, grid| {
            b.iter(|| contact_candidate_min_with(&sys, black_box(0.6), &Candidate::Homogeneous { sign: -1.0 }, grid).unwrap())
        });
    }
    group.finish();
}

fn liouville(c: &mut Criterion) {
    let sys = MagneticSystem::homogeneous(SurfaceModel::hyperbolic_genus(2), 1.0);
    let mut group = c.benchmark_group("liouville_action 128x64");
    group.sample_size(20);
    for (name, exec) in MODES {
        let grid = SmGrid { base: 128, fiber: 64, exec: exec.effective() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &grid, |b, grid| {
            b.iter(|| liouville_action_with(&sys, black_box(0.6), None, grid).unwrap())
        });
    }
    group.finish();
}

fn flux(c: &mut Criterion) {
    let sys = bump_torus();
    let mut group = c.benchmark_group("flux_total 512");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec.effective(), |b, &exec| {
            b.iter(|| flux_total(&sys, black_box(512), exec).unwrap())
        });
    }
    group.finish();
}

fn loop_gradient(c: &mut Criterion) {
    let sys = MagneticSystem::homogeneous(SurfaceModel::HyperbolicPlane { genus: None }, 1.0);
    let lp = oracle_circle(HomogeneousKind::Hyperbolic, 2.0).unwrap().discrete_loop(8192, 1.0).unwrap();
    let model = FluxModel::for_loop(&sys, &lp, (0.0, 0.0)).unwrap();
    let mut group = c.benchmark_group("action_gradient N=8192");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec.effective(), |b, &exec| {
            b.iter(|| discrete_action_gradient_with(black_box(&lp), &sys, 0.125, &model, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, contact_grid, liouville, flux, loop_gradient);
criterion_main!(benches);
