//! Shared fixtures for the benchmarks.

use eseem_core::echo::linspace;
use eseem_core::{EchoExperiment, EchoTrace, Engine, Projection, SpinSystemParams};

/// Hahn echo on the `M_I = +1` line of N@C60 over `points` delays up to 400 us.
pub fn nc60_experiment(engine: Engine, points: usize) -> EchoExperiment {
    EchoExperiment::hahn(
        SpinSystemParams::nc60(),
        linspace(0.0, 400e-6, points),
        Projection::integer(1),
    )
    .with_engine(engine)
}

/// Damped two-line modulation at the N@C60 frequencies.
pub fn synthetic_trace(points: usize) -> EchoTrace {
    let delta = SpinSystemParams::nc60().delta_hz();
    let tau = linspace(0.0, 400e-6, points);
    let v = tau
        .iter()
        .map(|t| {
            let x = 2.0 * std::f64::consts::PI * delta * t;
            (1.0 + 0.4 * x.cos() + 1.5 * (2.0 * x).cos()) * (-2.0 * t / 210e-6).exp()
        })
        .collect();
    EchoTrace::new(tau, v)
}
