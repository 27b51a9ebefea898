use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use isospec_bench::{neumann, parabola};
use isospec_core::gelfand_levitan::{build_kernel_from_coeffs, construct, solve_gl_with, ConstructOptions, GlMethod};
use isospec_core::{ForwardSolver, Grid, PerturbationSeq};

fn eigenvalues(c: &mut Criterion) {
    let op = parabola(2000);
    c.bench_function("eigenvalues n_max=20 M=2000", |b| {
        b.iter(|| ForwardSolver::new(black_box(&op)).eigenvalues(20).unwrap())
    });
}

fn gl_solve(c: &mut Criterion) {
    let base = parabola(2000);
    let coeffs = PerturbationSeq::new(vec![0.3, -0.2, 0.0, 0.1]).unwrap();
    let spec = ForwardSolver::new(&base).eigenvalues(3).unwrap();
    let kernel = build_kernel_from_coeffs(&base, &spec, &coeffs, Grid::new(400).unwrap()).unwrap();
    let mut group = c.benchmark_group("solve_gl M_gl=400");
    group.sample_size(10);
    for (name, method) in [("degenerate", GlMethod::Degenerate), ("low-rank", GlMethod::LowRank)] {
        group.bench_function(name, |b| b.iter(|| solve_gl_with(black_box(&kernel), method).unwrap()));
    }
    group.finish();
}

fn construction(c: &mut Criterion) {
    let base = neumann(2000);
    let coeffs = PerturbationSeq::new(vec![1.0]).unwrap();
    let mut group = c.benchmark_group("construct");
    group.sample_size(10);
    group.bench_function("neumann c0=1", |b| {
        b.iter(|| construct(black_box(&base), &coeffs, &ConstructOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eigenvalues, gl_solve, construction);
criterion_main!(benches);
