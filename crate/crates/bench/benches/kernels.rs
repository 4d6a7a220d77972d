use std::hint::black_box;

use beliefsim_core::aggregation::{calibrate_budget, solve_fixed_point, tilt, ExpertFamily};
use beliefsim_core::measures::{w2_barycenter_1d, w2_discrete};
use beliefsim_core::numerics::kummer_1f1;
use beliefsim_core::LognormalLaw;
use criterion::{criterion_group, criterion_main, Criterion};

fn transport(c: &mut Criterion) {
    let laws: Vec<_> = [(4.6, 0.2), (4.5, 0.4), (4.7, 0.1), (4.55, 0.3)]
        .iter()
        .map(|&(m, s)| LognormalLaw::new(m, s).unwrap().discretize(512).unwrap())
        .collect();
    c.bench_function("w2_discrete 512x512", |b| {
        b.iter(|| w2_discrete(black_box(&laws[0]), black_box(&laws[1])))
    });
    c.bench_function("barycenter 4x512", |b| {
        b.iter(|| w2_barycenter_1d(black_box(&laws), &[0.4, 0.3, 0.2, 0.1]).unwrap())
    });
}

fn tilts(c: &mut Criterion) {
    let uniform = ExpertFamily::AffineUniform { a_hat: 0.0, c1: 1.0 };
    let beta = ExpertFamily::AffineBeta {
        a_hat: 0.0,
        c1: 1.0,
        a_prior: 2.0,
        b_prior: 3.0,
    };
    c.bench_function("tilt uniform", |b| b.iter(|| tilt(black_box(3.7), &uniform).unwrap()));
    c.bench_function("tilt beta(2,3)", |b| b.iter(|| tilt(black_box(3.7), &beta).unwrap()));
    c.bench_function("kummer 1F1(2;5;-20)", |b| {
        b.iter(|| kummer_1f1(2.0, 5.0, black_box(-20.0)).unwrap())
    });
    c.bench_function("fixed point beta(2,3)", |b| {
        b.iter(|| solve_fixed_point(0.0, black_box(0.05), 1.0, &beta).unwrap())
    });
    c.bench_function("calibrate budget K=5", |b| {
        b.iter(|| calibrate_budget(black_box(5.0), 1.0, &beta, 1.0).unwrap())
    });
}

criterion_group!(benches, transport, tilts);
criterion_main!(benches);
