use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eseem_bench::{nc60_experiment, synthetic_trace};
use eseem_core::ensemble::{average_trace, AngleDistribution, EnsembleOptions, TraceSource};
use eseem_core::{fft_magnitude, find_peaks, fit_decay, run_two_pulse_echo, DecayModel, Engine, Window};

fn engines(c: &mut Criterion) {
    let mut g = c.benchmark_group("echo");
    g.sample_size(10);
    for engine in [Engine::AverageHamiltonian, Engine::ExactLabFrame] {
        let exp = nc60_experiment(engine, 256);
        g.bench_with_input(BenchmarkId::new(engine.name(), 256), &exp, |b, e| {
            b.iter(|| run_two_pulse_echo(e).unwrap())
        });
    }
    let exp = nc60_experiment(Engine::stepped(), 4);
    g.bench_with_input(BenchmarkId::new(Engine::stepped().name(), 4), &exp, |b, e| {
        b.iter(|| run_two_pulse_echo(e).unwrap())
    });
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    let source = TraceSource::Numeric(nc60_experiment(Engine::AverageHamiltonian, 512));
    for nodes in [21, 41] {
        let dist = AngleDistribution::gaussian(PI, 0.31).with_nodes(nodes);
        g.bench_with_input(BenchmarkId::new("quadrature", nodes), &dist, |b, d| {
            b.iter(|| average_trace(&source, d, EnsembleOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let trace = synthetic_trace(1024);
    c.bench_function("fft_and_peaks/1024x4", |b| {
        b.iter(|| find_peaks(&fft_magnitude(&trace, Window::Hann, 4).unwrap(), 0.05))
    });
    c.bench_function("fit/exp-two-cosine/1024", |b| {
        b.iter(|| fit_decay(&trace, DecayModel::ExpTwoCosine).unwrap())
    });
}

criterion_group!(benches, engines, ensemble, spectral);
criterion_main!(benches);
