//! Throughput of the hot paths: per-step stream generation, bulk pulse
//! application with the ODE integrator, array readout, and the
//! streaming weight pass.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use pcmsim::array::{ArrayConfig, ArraySim};
use pcmsim::baselines::weights_streaming;
use pcmsim::device::{DeviceParams, Pulse};
use pcmsim::ensemble::{EnsembleConfig, ProcessEnsemble, ProcessSource};

fn ensemble_cfg(n: usize, k: usize) -> EnsembleConfig {
    EnsembleConfig {
        n,
        n_correlated: n / 10,
        p: 0.01,
        c: 0.1,
        seed: 7,
        k_steps: k,
    }
}

fn bench_ensemble_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble_step");
    for &n in &[10_000usize, 100_000, 1_000_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut e = ProcessEnsemble::synthetic(ensemble_cfg(n, usize::MAX / 2)).unwrap();
            b.iter(|| e.next_step().unwrap().count_ones());
        });
    }
    group.finish();
}

fn bench_pulse_application(c: &mut Criterion) {
    let mut group = c.benchmark_group("pulse_subset");
    for &n in &[1_000usize, 10_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut array = ArraySim::new(ArrayConfig {
                n_devices: n,
                params: DeviceParams::default(),
                master_seed: 1,
            })
            .unwrap();
            array.reset_all();
            let ids: Vec<usize> = (0..n).collect();
            let pulse = Pulse::set(60.0, 50.0);
            b.iter(|| array.pulse_subset(&ids, &pulse).unwrap());
        });
    }
    group.finish();
}

fn bench_read_all(c: &mut Criterion) {
    let mut group = c.benchmark_group("read_all");
    for &n in &[10_000usize, 100_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut array = ArraySim::new(ArrayConfig {
                n_devices: n,
                params: DeviceParams::default(),
                master_seed: 2,
            })
            .unwrap();
            array.reset_all();
            b.iter(|| array.read_all());
        });
    }
    group.finish();
}

fn bench_streaming_weights(c: &mut Criterion) {
    c.bench_function("weights_streaming_10k_x_1k", |b| {
        b.iter(|| {
            let mut e = ProcessEnsemble::synthetic(ensemble_cfg(10_000, 1000)).unwrap();
            weights_streaming(&mut e).unwrap()
        });
    });
}

criterion_group!(
    benches,
    bench_ensemble_step,
    bench_pulse_application,
    bench_read_all,
    bench_streaming_weights
);
criterion_main!(benches);
