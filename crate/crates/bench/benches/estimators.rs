use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use permnqs_core::analytic::{sigma2_general, w_ground_state, SystemSize};
use permnqs_core::ansatz::{Activation, AnsatzParams};
use permnqs_core::exact_diag::{ed_dicke, ed_full};
use permnqs_core::model::{ModelSpec, SpinConfig};
use permnqs_core::observables::{energy_stats, local_energy};
use permnqs_core::sampler::{Ensemble, SamplerConfig};
use permnqs_core::trainer::{sr_step, TrainerConfig};

fn params() -> AnsatzParams {
    AnsatzParams::new(vec![0.08, 0.15, 0.3, 0.5], Activation::LogCosh).unwrap()
}

fn energy_estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    let p = params();
    for l in [8usize, 12, 16] {
        let model = ModelSpec::fully_connected(l, 1.0, 1.0).unwrap();
        for (name, cfg) in [
            ("exact-full", SamplerConfig::exact_full()),
            ("exact-sector", SamplerConfig::exact_sector()),
            ("metropolis", SamplerConfig::metropolis(4, 200, 1)),
        ] {
            group.bench_with_input(BenchmarkId::new(name, l), &l, |b, _| {
                b.iter(|| {
                    let ens = Ensemble::build(&model, &p, &cfg).unwrap();
                    black_box(energy_stats(&ens).unwrap())
                })
            });
        }
    }
    group.finish();
}

fn local_energy_kernel(c: &mut Criterion) {
    let p = params();
    let mut group = c.benchmark_group("local_energy");
    for alpha in [0.0, 1.5] {
        let model = ModelSpec::new(32, 1.0, 1.0, alpha).unwrap();
        let config = SpinConfig::from_bits(0xDEAD_BEEF, 32);
        group.bench_with_input(BenchmarkId::from_parameter(alpha), &alpha, |b, _| {
            b.iter(|| black_box(local_energy(&model, &p, black_box(&config))))
        });
    }
    group.finish();
}

fn exact_diagonalization(c: &mut Criterion) {
    let mut group = c.benchmark_group("ed");
    group.sample_size(10);
    let model = ModelSpec::fully_connected(12, 1.0, 1.0).unwrap();
    group.bench_function("lanczos-l12", |b| b.iter(|| black_box(ed_full(&model).unwrap())));
    let big = ModelSpec::fully_connected(1000, 1.0, 1.0).unwrap();
    group.bench_function("dicke-l1000", |b| b.iter(|| black_box(ed_dicke(&big).unwrap())));
    group.finish();
}

fn closed_forms(c: &mut Criterion) {
    let l = 100_000;
    let w = w_ground_state(1.0, 1.0, SystemSize::Finite(l)).unwrap();
    c.bench_function("sigma2_general-l1e5", |b| {
        b.iter(|| black_box(sigma2_general(1.0, 1.0, black_box(l), 2.0, w).unwrap()))
    });
}

fn sr_update(c: &mut Criterion) {
    let model = ModelSpec::fully_connected(12, 1.0, 1.0).unwrap();
    let p = params();
    let mut group = c.benchmark_group("sr_step");
    for (name, sampler) in [
        ("exact-full", SamplerConfig::exact_full()),
        ("exact-sector", SamplerConfig::exact_sector()),
    ] {
        let cfg = TrainerConfig {
            sampler,
            ..TrainerConfig::default()
        };
        group.bench_function(name, |b| b.iter(|| black_box(sr_step(&model, &p, &cfg, 0, None).unwrap())));
    }
    group.finish();
}

criterion_group!(
    benches,
    energy_estimators,
    local_energy_kernel,
    exact_diagonalization,
    closed_forms,
    sr_update
);
criterion_main!(benches);
