//! Assembly, projection and state-solve kernels on a single-thread pool
//! versus the default rayon pool. Built without the `parallel` feature both
//! variants run the sequential fallback.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use obstacle_core::fem::StateField;
use obstacle_core::optimize::random_direction;
use obstacle_core::state::solve_regularized_state;
use obstacle_core::{ControlField, FemSpace, Mesh, ObstacleProblem, PolynomialMax, ProblemParams, SolverOptions};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = rayon::current_num_threads();
    let mut sizes = vec![1];
    if n > 1 {
        sizes.push(n);
    }
    sizes
        .into_iter()
        .map(|t| (format!("threads={t}"), rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

fn kernels(c: &mut Criterion) {
    let space = Arc::new(FemSpace::new(Mesh::unit_square(128).unwrap()).unwrap());
    let prob = ObstacleProblem::new(space.clone(), &ProblemParams::reference()).unwrap();
    let q = ControlField::scalar(space.num_triangles(), 1.25, prob.bounds());
    let wild = ControlField {
        entries: random_direction(&space, 1).iter().map(|d| d.scale(1e3)).collect(),
        bounds: prob.bounds(),
    };
    let m = PolynomialMax::new(1e3).unwrap();
    let opts = SolverOptions::default();
    let zero = StateField::zeros(space.num_nodes());

    let mut group = c.benchmark_group("kernels");
    group.sample_size(20);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("assemble_stiffness", &label), |b| {
            b.iter(|| pool.install(|| space.assemble_stiffness(black_box(&q.entries)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("project_control", &label), |b| {
            b.iter(|| pool.install(|| black_box(&wild).projected()))
        });
        group.bench_function(BenchmarkId::new("solve_state", &label), |b| {
            b.iter(|| pool.install(|| solve_regularized_state(&prob, &q, &m, &zero, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
