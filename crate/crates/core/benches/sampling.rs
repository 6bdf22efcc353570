use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ginibre_core::dynamics::{DiffusionParams, InitialCondition};
use ginibre_core::estimators::{ensemble_log_determinants, sample_eigenvalues, sample_spectra};
use ginibre_core::spectral::{EigenOptions, QuaternionPoint};
use ginibre_core::{Complex64, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectra");
    group.sample_size(10);
    let params = DiffusionParams::new(50, 1.0, 1, 32).unwrap();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("eigenvalues_n50", name), &exec, |b, &exec| {
            b.iter(|| black_box(sample_eigenvalues(&params, &InitialCondition::Zero, exec).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("overlaps_n50", name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(sample_spectra(&params, &InitialCondition::Zero, &EigenOptions::default(), exec).unwrap())
            })
        });
    }
    group.finish();
}

fn determinants(c: &mut Criterion) {
    let mut group = c.benchmark_group("determinants");
    group.sample_size(10);
    let params = DiffusionParams::new(20, 1.0, 1, 2000).unwrap();
    let points = [QuaternionPoint::radial(Complex64::new(1.2, 0.0), 0.3)];
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("log_det_n20", name), &exec, |b, &exec| {
            b.iter(|| black_box(ensemble_log_determinants(&params, &InitialCondition::Zero, &points, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, spectra, determinants);
criterion_main!(benches);
