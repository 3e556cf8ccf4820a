use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use geflab_core::field::sample_gef;
use geflab_core::kacrice::{sigma_pair, zero_crit_moments, Budget, Route};
use geflab_core::kernel::{eval_cov, DerivDescriptor};
use geflab_core::landmarks::{find_landmarks, Disk, SearchParams};
use geflab_core::C64;

fn jets(c: &mut Criterion) {
    let g = sample_gef(6.5, 1, 0).unwrap();
    let z = C64::new(3.1, -2.4);
    c.bench_function("eval_jet r=6", |b| b.iter(|| g.eval_jet(black_box(z)).unwrap()));
}

fn landmark_search(c: &mut Criterion) {
    let g = sample_gef(4.5, 2, 0).unwrap();
    let params = SearchParams::default();
    let mut group = c.benchmark_group("landmarks");
    group.sample_size(10);
    group.bench_function("find_landmarks R=4", |b| b.iter(|| find_landmarks(&g, &Disk::centered(4.0), &params).unwrap()));
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let o = C64::new(0.0, 0.0);
    let descs = [
        DerivDescriptor::f(C64::new(0.0, 0.2)),
        DerivDescriptor::f(C64::new(0.0, -0.2)),
        DerivDescriptor::f_real(1, 0, o).unwrap(),
        DerivDescriptor::f_real(0, 2, o).unwrap(),
        DerivDescriptor::f_real(0, 3, o).unwrap(),
    ];
    c.bench_function("eval_cov 5x5", |b| b.iter(|| eval_cov(black_box(&descs))));
}

fn conditioned_draws(c: &mut Criterion) {
    let (z, w) = (C64::new(0.0, 0.1), C64::new(0.0, -0.1));
    let budget = Budget::new(10_000, 3);
    let mut group = c.benchmark_group("conditioned");
    group.sample_size(10);
    group.bench_function("sigma 1e4 covariance", |b| b.iter(|| sigma_pair(z, w, &budget, Route::Covariance, 0).unwrap()));
    group.bench_function("sigma 1e4 projection", |b| b.iter(|| sigma_pair(z, w, &budget, Route::Projection, 0).unwrap()));
    group.bench_function("zero-crit 1e4 projection", |b| {
        b.iter(|| zero_crit_moments(C64::new(0.5, 0.0), C64::new(0.0, 0.0), &budget, Route::Projection, 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, jets, landmark_search, kernel, conditioned_draws);
criterion_main!(benches);
