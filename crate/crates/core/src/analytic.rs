//! Closed-form echo envelopes for ideal pulses.
//!
//! `delta_hz` is passed explicitly so these functions can be evaluated at fitted
//! values without building a spin system.

use std::f64::consts::PI;

use crate::echo::EchoTrace;
use crate::matrix::C64;
use crate::spin::{Projection, SpinQuantumNumber};

/// Weights of the constant, `delta` and `2 delta` terms of the outer-line envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub theta2: f64,
}

impl ModulationCoefficients {
    pub fn sum(&self) -> f64 {
        self.a0 + self.a1 + self.a2
    }
}

pub fn coefficients(theta2: f64) -> ModulationCoefficients {
    let c2 = (theta2 / 2.0).cos().powi(2);
    let s2 = (theta2 / 2.0).sin().powi(2);
    ModulationCoefficients {
        a0: 1.0 - 6.0 * c2 + 13.5 * c2 * c2,
        a1: 6.0 * c2 * (2.0 - 3.0 * c2),
        a2: 1.5 * s2 * (1.0 - 3.0 * c2),
        theta2,
    }
}

fn prefactor(theta1: f64, theta2: f64) -> f64 {
    2.0 * theta1.sin() * (theta2 / 2.0).sin().powi(2)
}

/// Echo amplitude of the `M_I = +-1` lines of an S = 3/2, I = 1 pair.
pub fn v_outer(tau: f64, theta1: f64, theta2: f64, delta_hz: f64) -> f64 {
    let k = coefficients(theta2);
    let x = 2.0 * PI * delta_hz * tau;
    prefactor(theta1, theta2) * (k.a0 + k.a1 * x.cos() + k.a2 * (2.0 * x).cos())
}

/// Nominal echo amplitude of the `M_I = 0` line; independent of tau.
///
/// The density-matrix simulation in the normalization of [`v_outer`] gives
/// `coefficients(theta2).sum()` (= 2.5) times this value.
pub fn v_center(theta1: f64, theta2: f64) -> f64 {
    prefactor(theta1, theta2)
}

/// `(S - M)(S + M + 1)` for `M = -S ..= S`, ascending.
pub fn general_coefficients(s: SpinQuantumNumber) -> Vec<(Projection, f64)> {
    let mut out: Vec<(Projection, f64)> = s
        .projections()
        .map(|m| {
            let (sv, mv) = (s.value(), m.value());
            (m, (sv - mv) * (sv + mv + 1.0))
        })
        .collect();
    out.reverse();
    out
}

/// Perfect-refocusing envelope for any electron spin:
/// `sum_M (S - M)(S + M + 1) exp(i (1 + 2M) m_i 2 pi delta tau)`.
///
/// The real part is the physical signal. It equals twice the numerical
/// `pi/2 - pi` echo.
pub fn v_general(s: SpinQuantumNumber, m_i: Projection, tau: f64, delta_hz: f64) -> C64 {
    let x = 2.0 * PI * delta_hz * tau;
    general_coefficients(s)
        .into_iter()
        .map(|(m, w)| C64::from_polar(w, (1.0 + 2.0 * m.value()) * m_i.value() * x))
        .sum()
}

pub fn outer_trace(tau: &[f64], theta1: f64, theta2: f64, delta_hz: f64) -> EchoTrace {
    let k = coefficients(theta2);
    EchoTrace::new(
        tau.to_vec(),
        tau.iter().map(|&t| v_outer(t, theta1, theta2, delta_hz)).collect(),
    )
    .with_meta("source", "analytic-outer")
    .with_meta("a0", k.a0)
    .with_meta("a1", k.a1)
    .with_meta("a2", k.a2)
    .with_meta("delta_hz", delta_hz)
}

pub fn center_trace(tau: &[f64], theta1: f64, theta2: f64) -> EchoTrace {
    EchoTrace::new(tau.to_vec(), vec![v_center(theta1, theta2); tau.len()]).with_meta("source", "analytic-center")
}

pub fn general_trace(s: SpinQuantumNumber, m_i: Projection, tau: &[f64], delta_hz: f64) -> EchoTrace {
    let values: Vec<C64> = tau.iter().map(|&t| v_general(s, m_i, t, delta_hz)).collect();
    let mut trace = EchoTrace::new(tau.to_vec(), values.iter().map(|z| z.re).collect())
        .with_meta("source", "analytic-general")
        .with_meta("assumption", "perfect refocusing pulse")
        .with_meta("s", s.value())
        .with_meta("m_i", m_i)
        .with_meta("delta_hz", delta_hz);
    trace.v_im_residual = values.iter().map(|z| z.im).collect();
    trace
}
