use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fraclab::control::{sharpness_experiment, ObservationRegion};
use fraclab::operator::FractionalOrder;
use fraclab::par::Execution;
use fraclab::spectrum::compute_spectra;

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn orders(values: &[f64]) -> Vec<FractionalOrder> {
    values
        .iter()
        .map(|&b| FractionalOrder::new(b).unwrap())
        .collect()
}

fn spectra(c: &mut Criterion) {
    let cells: Vec<_> = orders(&[0.2, 0.4, 0.6, 0.8])
        .into_iter()
        .map(|b| (b, 256))
        .collect();
    let mut group = c.benchmark_group("spectra");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| compute_spectra(black_box(&cells), 10, exec).unwrap())
        });
    }
    group.finish();
}

fn sharpness(c: &mut Criterion) {
    let betas = orders(&[0.25, 0.5, 0.75]);
    let region = ObservationRegion::boundary_neighbourhood(0.2).unwrap();
    let mut group = c.benchmark_group("sharpness");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                sharpness_experiment(black_box(&betas), &[5, 10, 20], &region, 4.0, 256, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spectra, sharpness);
criterion_main!(benches);
