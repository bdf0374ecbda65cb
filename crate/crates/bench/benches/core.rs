use criterion::{black_box, criterion_group, criterion_main, Criterion};

use coflow_core::dynamics::{integrate, Flavor, FlowConfig};
use coflow_core::forms::Orientation;
use coflow_core::scalar::int;
use coflow_core::sphere::index_lower_bound;
use coflow_core::stability::{find_critical_points, jacobian, CriticalLabel};
use coflow_core::verify::run_identity_suite;

fn identity_suite(c: &mut Criterion) {
    c.bench_function("identity suite, 1 point per orientation", |b| {
        b.iter(|| run_identity_suite(black_box(1), 1, 1).unwrap())
    });
}

fn flow(c: &mut Criterion) {
    let cfg = FlowConfig::new(Flavor::NormalizedCoflow, Orientation::Minus);
    c.bench_function("coflow to convergence", |b| {
        b.iter(|| integrate(&cfg, black_box([1.3, 0.8, 1.1])).unwrap())
    });
}

fn linearize(c: &mut Criterion) {
    let point = find_critical_points(Flavor::ModifiedCoflow, 4.0, 3.0, Orientation::Plus)
        .unwrap()
        .into_iter()
        .find(|p| p.label == CriticalLabel::Tau0EqKappa)
        .unwrap();
    c.bench_function("exact and numeric jacobian", |b| b.iter(|| jacobian(black_box(&point)).unwrap()));
}

fn sphere(c: &mut Criterion) {
    let gamma = int(3);
    c.bench_function("sphere index bound, l = 1..60", |b| {
        b.iter(|| index_lower_bound(black_box(1), 60, &gamma).unwrap())
    });
}

criterion_group!(benches, identity_suite, flow, linearize, sphere);
criterion_main!(benches);
