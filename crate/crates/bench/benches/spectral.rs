use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hillspec_bench::{bump, complex, gasymov, mathieu};
use hillspec_core::discriminant::hill_discriminant;
use hillspec_core::expansion;
use hillspec_core::oracle::{self, ContourOptions};
use hillspec_core::spectrum::{self, EIGEN_TOL};
use hillspec_core::{ode, Complex64 as C64};

fn monodromy(c: &mut Criterion) {
    let p = complex();
    let mut g = c.benchmark_group("monodromy");
    for lambda in [10.0, 1e3, 1e5] {
        g.bench_with_input(BenchmarkId::from_parameter(lambda), &lambda, |b, &l| {
            b.iter(|| ode::monodromy(&p, black_box(C64::new(l, 1.0)), EIGEN_TOL).unwrap())
        });
    }
    g.finish();
}

fn discriminant(c: &mut Criterion) {
    let p = mathieu();
    c.bench_function("hill_discriminant", |b| {
        b.iter(|| hill_discriminant(&p, black_box(C64::new(120.0, 3.0)), EIGEN_TOL).unwrap())
    });
}

fn eigenvalues(c: &mut Criterion) {
    let p = complex();
    let mut g = c.benchmark_group("solve_labeled");
    g.sample_size(20);
    for n in [2i64, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| spectrum::solve_labeled(&p, C64::new(1.0, 0.0), -n, n, EIGEN_TOL, false).unwrap())
        });
    }
    g.finish();
}

fn green(c: &mut Criterion) {
    let p = mathieu();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("green_kernel_129", |b| {
        b.iter(|| oracle::green_kernel(&p, C64::new(-3.0, 1.0), C64::new(0.7, 0.0), 129, EIGEN_TOL).unwrap())
    });
    g.bench_function("galerkin_41", |b| b.iter(|| oracle::galerkin_eigensolve(&p, C64::new(1.0, 0.0), 20).unwrap()));
    g.bench_function("total_projection_n1", |b| {
        let f = bump();
        let opts = ContourOptions::default();
        b.iter(|| oracle::total_projection(&gasymov(), &f, 1, C64::new(0.01, 0.0), 0.02, &opts).unwrap())
    });
    g.finish();
}

fn bundles(c: &mut Criterion) {
    let p = gasymov();
    let f = bump();
    let mut g = c.benchmark_group("expansion");
    g.sample_size(10);
    g.bench_function("band_sum_pm1", |b| {
        b.iter(|| expansion::band_sum(&p, &f, &[1, -1], C64::new(0.5, 0.0), 257, EIGEN_TOL).unwrap())
    });
    g.finish();
}

criterion_group!(benches, monodromy, discriminant, eigenvalues, green, bundles);
criterion_main!(benches);
