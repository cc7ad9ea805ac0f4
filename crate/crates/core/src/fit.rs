//! Least-squares fits of decaying echo envelopes.
//!
//! Models, with `r = 1/T2`:
//! * [`DecayModel::Exp`]: `v0 exp(-2 r tau)`
//! * [`DecayModel::ExpTwoCosine`]: `exp(-2 r tau) [c0 + c1 cos(2 pi f tau) + c2 cos(4 pi f tau)]`

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::echo::EchoTrace;
use crate::error::{EseemError, Result};
use crate::spectral::{fft_magnitude, find_peaks, uniform_spacing, Window};

pub const MAX_ITERATIONS: usize = 200;
pub const TOLERANCE: f64 = 1e-10;
/// Minimum number of points per free parameter.
pub const POINTS_PER_PARAMETER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    Exp,
    ExpTwoCosine,
}

impl DecayModel {
    pub fn parameter_count(self) -> usize {
        match self {
            DecayModel::Exp => 2,
            DecayModel::ExpTwoCosine => 5,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(DecayModel::Exp),
            "exp-two-cosine" | "exp2cos" => Some(DecayModel::ExpTwoCosine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: DecayModel,
    /// Amplitude at tau = 0.
    pub v0: f64,
    pub t2_s: f64,
    /// Fundamental modulation frequency, two-cosine model only.
    pub delta_hz: Option<f64>,
    /// `[c0, c1, c2]` for the two-cosine model, `[v0]` otherwise.
    pub amplitudes: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the iteration limit was reached; the parameters are then the best found.
    pub converged: bool,
}

impl FitResult {
    /// Model value `exp(-2 tau / T2) (c0 + c1 cos(2 pi delta tau) + c2 cos(4 pi delta tau))`.
    pub fn evaluate(&self, tau: f64) -> f64 {
        let decay = (-2.0 * tau / self.t2_s).exp();
        let x = 2.0 * PI * self.delta_hz.unwrap_or(0.0) * tau;
        decay
            * self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(h, c)| c * (h as f64 * x).cos())
                .sum::<f64>()
    }
}

/// Internal parameters are on the scaled axis `x = tau / tau_max`:
/// Exp `[v0, k]`, ExpTwoCosine `[c0, c1, c2, k, phi]` with `k = r tau_max`, `phi = f tau_max`.
fn model_eval(model: DecayModel, p: &[f64], x: f64, jac: Option<&mut [f64]>) -> f64 {
    let k = match model {
        DecayModel::Exp => p[1],
        DecayModel::ExpTwoCosine => p[3],
    };
    let e = (-2.0 * k * x).exp();
    match model {
        DecayModel::Exp => {
            let v = p[0] * e;
            if let Some(j) = jac {
                j[0] = e;
                j[1] = -2.0 * x * v;
            }
            v
        }
        DecayModel::ExpTwoCosine => {
            let w = 2.0 * PI * p[4] * x;
            let (c1, c2) = (w.cos(), (2.0 * w).cos());
            let osc = p[0] + p[1] * c1 + p[2] * c2;
            let v = e * osc;
            if let Some(j) = jac {
                j[0] = e;
                j[1] = e * c1;
                j[2] = e * c2;
                j[3] = -2.0 * x * v;
                j[4] = -e * 2.0 * PI * x * (p[1] * w.sin() + 2.0 * p[2] * (2.0 * w).sin());
            }
            v
        }
    }
}

struct Problem<'a> {
    model: DecayModel,
    x: &'a [f64],
    y: &'a [f64],
}

impl Problem<'_> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&x, &y)| model_eval(self.model, p, x, None) - y),
        )
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let np = self.model.parameter_count();
        let mut j = DMatrix::zeros(self.x.len(), np);
        let mut row = vec![0.0; np];
        for (i, &x) in self.x.iter().enumerate() {
            model_eval(self.model, p, x, Some(&mut row));
            for (c, v) in row.iter().enumerate() {
                j[(i, c)] = *v;
            }
        }
        j
    }

    fn cost(&self, p: &[f64]) -> f64 {
        self.residuals(p).norm_squared()
    }
}

struct LmOutcome {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg-Marquardt with Marquardt scaling. Only steps that lower the cost are accepted.
fn levenberg_marquardt(problem: &Problem, start: Vec<f64>, data_scale: f64) -> LmOutcome {
    let mut p = start;
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    let negligible = 1e-28 * data_scale;
    for iter in 1..=MAX_ITERATIONS {
        if cost <= negligible {
            return LmOutcome {
                params: p,
                cost,
                iterations: iter - 1,
                converged: true,
            };
        }
        let j = problem.jacobian(&p);
        let r = problem.residuals(&p);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = problem.cost(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= TOLERANCE * (p_norm + TOLERANCE);
                let small_gain = cost - trial_cost <= TOLERANCE * cost;
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    return LmOutcome {
                        params: p,
                        cost,
                        iterations: iter,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at any damping: a stationary point
            return LmOutcome {
                params: p,
                cost,
                iterations: iter,
                converged: true,
            };
        }
    }
    LmOutcome {
        params: p,
        cost,
        iterations: MAX_ITERATIONS,
        converged: false,
    }
}

/// Ordinary least squares `min |A c - y|` for the linear amplitudes.
fn linear_amplitudes(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let a = DMatrix::from_fn(y.len(), columns.len(), |r, c| columns[c][r]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-12).ok()?;
    let res = (&a * &c - b).norm_squared();
    Some((c.iter().copied().collect(), res))
}

/// Decay rate (per unit x) from a log-linear fit of block RMS values.
fn initial_rate(x: &[f64], y: &[f64]) -> f64 {
    let blocks = 8.min(x.len() / 4).max(2);
    let size = x.len() / blocks;
    let mut pts = Vec::new();
    for b in 0..blocks {
        let seg = b * size..((b + 1) * size).min(x.len());
        let n = seg.len() as f64;
        let rms = (y[seg.clone()].iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        let xc = x[seg].iter().sum::<f64>() / n;
        if rms > 0.0 {
            pts.push((xc, rms.ln()));
        }
    }
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (-0.5 * sxy / sxx).max(0.0)
}

pub fn fit_decay(trace: &EchoTrace, model: DecayModel) -> Result<FitResult> {
    let n = trace.v.len();
    let np = model.parameter_count();
    let required = POINTS_PER_PARAMETER * np;
    if n < required {
        return Err(EseemError::InsufficientData {
            points: n,
            parameters: np,
            required,
        });
    }
    if trace.tau_s.len() != n {
        return Err(EseemError::DimensionMismatch {
            expected: trace.tau_s.len(),
            actual: n,
        });
    }
    if trace.v.iter().any(|v| !v.is_finite()) {
        return Err(EseemError::DegenerateData("non-finite samples".into()));
    }
    let data_scale: f64 = trace.v.iter().map(|v| v * v).sum();
    if data_scale == 0.0 {
        return Err(EseemError::DegenerateData("trace is identically zero".into()));
    }
    let tau_max = trace.tau_s.iter().copied().fold(0.0_f64, f64::max);
    if !(tau_max > 0.0) {
        return Err(EseemError::DegenerateData("tau range is empty".into()));
    }
    let x: Vec<f64> = trace.tau_s.iter().map(|t| t / tau_max).collect();
    let y = &trace.v;
    let problem = Problem { model, x: &x, y };
    let k0 = initial_rate(&x, y);
    let decay: Vec<f64> = x.iter().map(|x| (-2.0 * k0 * x).exp()).collect();

    let start = match model {
        DecayModel::Exp => {
            let (c, _) = linear_amplitudes(std::slice::from_ref(&decay), y)
                .ok_or_else(|| EseemError::DegenerateData("singular amplitude fit".into()))?;
            vec![c[0], k0]
        }
        DecayModel::ExpTwoCosine => {
            uniform_spacing(&trace.tau_s)?;
            let spec = fft_magnitude(trace, Window::Hann, 8)?;
            let peak = find_peaks(&spec, 0.05)
                .strongest()
                .ok_or_else(|| EseemError::DegenerateData("no modulation peak found".into()))?;
            // The strongest line is either the fundamental or its second harmonic.
            // The half-frequency model contains the full-frequency line, so it is
            // kept unless the full-frequency model is clearly better.
            let floor = 1e-20 * data_scale;
            let mut best: Option<(f64, Vec<f64>)> = None;
            for f in [peak.freq_hz / 2.0, peak.freq_hz] {
                let phi = f * tau_max;
                let cols: Vec<Vec<f64>> = (0..3)
                    .map(|h| {
                        x.iter()
                            .zip(&decay)
                            .map(|(x, d)| d * (2.0 * PI * h as f64 * phi * x).cos())
                            .collect()
                    })
                    .collect();
                if let Some((c, res)) = linear_amplitudes(&cols, y) {
                    if best.as_ref().map_or(true, |b| res + floor < 0.5 * (b.0 + floor)) {
                        best = Some((res, vec![c[0], c[1], c[2], k0, phi]));
                    }
                }
            }
            best.ok_or_else(|| EseemError::DegenerateData("singular amplitude fit".into()))?
                .1
        }
    };

    let out = levenberg_marquardt(&problem, start, data_scale);
    let p = &out.params;
    let (v0, k, delta, amplitudes) = match model {
        DecayModel::Exp => (p[0], p[1], None, vec![p[0]]),
        DecayModel::ExpTwoCosine => (p[0] + p[1] + p[2], p[3], Some(p[4].abs() / tau_max), p[..3].to_vec()),
    };
    Ok(FitResult {
        model,
        v0,
        t2_s: if k > 0.0 { tau_max / k } else { f64::INFINITY },
        delta_hz: delta,
        amplitudes,
        residual_norm: out.cost.sqrt(),
        iterations: out.iterations,
        converged: out.converged,
    })
}
