use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use poisfam::{integrate, jacobi_residual, IntegrationOptions};
use poisfam_bench::{lv3_fixture, nlv_fixture};

fn structure_matrix(c: &mut Criterion) {
    let (sys, pts) = lv3_fixture(64);
    c.bench_function("structure_matrix/lv3", |b| {
        b.iter(|| {
            for p in &pts {
                black_box(sys.spec().structure_matrix(black_box(p)).unwrap());
            }
        })
    });
    let (sys8, pts8) = nlv_fixture(8, 64);
    c.bench_function("structure_matrix/nlv8", |b| {
        b.iter(|| {
            for p in &pts8 {
                black_box(sys8.spec().structure_matrix(black_box(p)).unwrap());
            }
        })
    });
}

fn jacobi(c: &mut Criterion) {
    let (sys, pts) = lv3_fixture(16);
    c.bench_function("jacobi_residual/lv3", |b| {
        b.iter(|| {
            for p in &pts {
                black_box(jacobi_residual(&**sys.spec(), black_box(p)).unwrap());
            }
        })
    });
    let (sys8, pts8) = nlv_fixture(8, 16);
    c.bench_function("jacobi_residual/nlv8", |b| {
        b.iter(|| {
            for p in &pts8 {
                black_box(jacobi_residual(&**sys8.spec(), black_box(p)).unwrap());
            }
        })
    });
}

fn integration(c: &mut Criterion) {
    let (sys, _) = lv3_fixture(1);
    let opts = IntegrationOptions::default();
    // short horizon: the default box is small
    c.bench_function("integrate/lv3", |b| {
        b.iter(|| black_box(integrate(&sys, &[1.0, 2.0, 3.0], 0.005, &opts).unwrap()))
    });
}

criterion_group!(benches, structure_matrix, jacobi, integration);
criterion_main!(benches);
