//! Cross-check of the average-Hamiltonian engine against direct integration of
//! the rotating-frame Hamiltonian.

use std::f64::consts::PI;

use serde::Serialize;

use crate::echo::{linspace, run_two_pulse_echo, EchoExperiment, Engine, Evolver};
use crate::error::{EseemError, Result};
use crate::hamiltonian::{SpinSystemParams, PERTURBATIVE_RATIO_LIMIT};
use crate::spin::Projection;

/// Relative tolerance on the outer-minus-inner coherence frequency.
pub const FREQUENCY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhtReport {
    pub m_i: f64,
    pub coupling_ratio: f64,
    /// Largest `|V_avg - V_reference|` over the grid.
    pub max_v_deviation: f64,
    /// Largest deviation of the outer-minus-inner coherence phase (rad).
    pub max_phase_deviation: f64,
    pub frequency_avg_hz: f64,
    pub frequency_reference_hz: f64,
    pub frequency_relative_error: f64,
    pub warnings: Vec<String>,
    pub passed: bool,
}

/// Phase of the outer `(S, S-1)` single-quantum coherence relative to the
/// innermost one after free evolution, in block `m_i`.
fn relative_sq_phase(evolver: &Evolver, system: &SpinSystemParams, m_i: Projection, tau: f64) -> Result<f64> {
    let u = evolver.propagator(tau, 0.0)?;
    let idx = system.basis().block_indices(m_i)?;
    let n = idx.len();
    let coherence = |a: usize| u.get(idx[a], idx[a]) * u.get(idx[a + 1], idx[a + 1]).conj();
    let inner = (n - 1) / 2;
    Ok((coherence(0) * coherence(inner).conj()).arg())
}

fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0_f64;
    for (k, &p) in phases.iter().enumerate() {
        if k > 0 {
            let step: f64 = p + offset - out[k - 1];
            offset -= 2.0 * PI * (step / (2.0 * PI)).round();
        }
        out.push(p + offset);
    }
    out
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Compares the average-Hamiltonian engine with the stepped rotating-frame
/// integrator for an ideal `pi/2 - pi` echo on the largest nuclear projection,
/// on resonance, over `n_points` delays up to `tau_max`.
pub fn validate_aht(system: &SpinSystemParams, tau_max: f64, n_points: usize) -> Result<AhtReport> {
    compare_engines(system, Engine::stepped(), tau_max, n_points)
}

/// As [`validate_aht`] with any reference engine.
pub fn compare_engines(
    system: &SpinSystemParams,
    reference: Engine,
    tau_max: f64,
    n_points: usize,
) -> Result<AhtReport> {
    system.validate()?;
    if !(tau_max > 0.0 && tau_max.is_finite()) || n_points < 3 {
        return Err(EseemError::InvalidExperiment(
            "validate_aht needs tau_max > 0 and at least 3 points".into(),
        ));
    }
    if system.s.twice() < 2 {
        return Err(EseemError::InvalidSpin("validate_aht needs S >= 1".into()));
    }
    let m_i = Projection::from_twice(system.i.twice() as i32);
    let tau = linspace(0.0, tau_max, n_points);

    let base = EchoExperiment::hahn(*system, tau.clone(), m_i);
    let v_avg = run_two_pulse_echo(&base.clone().with_engine(Engine::AverageHamiltonian))?;
    let v_step = run_two_pulse_echo(&base.clone().with_engine(reference))?;
    let max_v_deviation = v_avg
        .v
        .iter()
        .zip(&v_step.v)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));

    let eff = base.effective_system();
    let avg = Evolver::new(Engine::AverageHamiltonian, &eff)?;
    let step = Evolver::new(reference, &eff)?;
    let mut pa = Vec::with_capacity(n_points);
    let mut ps = Vec::with_capacity(n_points);
    for &t in &tau {
        pa.push(relative_sq_phase(&avg, &eff, m_i, t)?);
        ps.push(relative_sq_phase(&step, &eff, m_i, t)?);
    }
    let (pa, ps) = (unwrap(&pa), unwrap(&ps));
    let max_phase_deviation = pa.iter().zip(&ps).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let frequency_avg_hz = -slope(&tau, &pa) / (2.0 * PI);
    let frequency_reference_hz = -slope(&tau, &ps) / (2.0 * PI);
    let frequency_relative_error = if frequency_avg_hz.abs() > 0.0 {
        ((frequency_reference_hz - frequency_avg_hz) / frequency_avg_hz).abs()
    } else {
        (frequency_reference_hz - frequency_avg_hz).abs()
    };

    let mut warnings = system.warnings();
    if system.coupling_ratio() > PERTURBATIVE_RATIO_LIMIT {
        warnings.push("perturbative regime exceeded: engines are expected to disagree".into());
    }
    Ok(AhtReport {
        m_i: m_i.value(),
        coupling_ratio: system.coupling_ratio(),
        max_v_deviation,
        max_phase_deviation,
        frequency_avg_hz,
        frequency_reference_hz,
        frequency_relative_error,
        passed: frequency_relative_error <= FREQUENCY_TOLERANCE,
        warnings,
    })
}
