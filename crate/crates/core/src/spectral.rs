//! Magnitude spectra of echo envelopes and peak picking.

use std::f64::consts::PI;
use std::fmt;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::echo::EchoTrace;
use crate::error::{EseemError, Result};
use crate::fit::{fit_decay, DecayModel};
use crate::matrix::C64;

pub const DEFAULT_ZERO_PAD: usize = 4;
pub const DEFAULT_REL_THRESHOLD: f64 = 0.05;
/// Relative spacing deviation accepted as a uniform grid.
pub const GRID_TOLERANCE: f64 = 1e-9;
/// Peaks below this fraction of the signal scale are treated as numerical noise.
const ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Symmetric window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n < 2 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rectangular" | "rect" | "none" => Some(Window::Rectangular),
            "hann" => Some(Window::Hann),
            _ => None,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        })
    }
}

/// Background removed from a trace before transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Only the mean, which [`fft_magnitude`] always subtracts.
    #[default]
    Mean,
    /// A fitted `v0 exp(-2 tau / T2)` decay.
    #[serde(rename = "exp")]
    Exponential,
}

impl Baseline {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "mean" => Some(Baseline::Mean),
            "exp" | "exponential" => Some(Baseline::Exponential),
            _ => None,
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Mean => "mean",
            Baseline::Exponential => "exp",
        })
    }
}

/// Subtracts the chosen background. An identically zero trace is returned unchanged.
pub fn remove_baseline(trace: &EchoTrace, baseline: Baseline) -> Result<EchoTrace> {
    let mut out = trace.clone();
    if baseline == Baseline::Mean || trace.v.iter().all(|v| *v == 0.0) {
        return Ok(out);
    }
    let fit = fit_decay(trace, DecayModel::Exp)?;
    for (v, t) in out.v.iter_mut().zip(&trace.tau_s) {
        *v -= fit.evaluate(*t);
    }
    out.metadata.insert("baseline".into(), baseline.to_string());
    Ok(out)
}

/// One-sided magnitude spectrum from 0 to Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub window: Window,
    pub zero_pad_factor: usize,
    /// Length of the padded transform.
    pub fft_len: usize,
    /// Sum of the window coefficients.
    pub coherent_gain: f64,
    /// Largest `|v|` of the input trace.
    pub signal_scale: f64,
}

impl Spectrum {
    pub fn resolution_hz(&self) -> f64 {
        self.freq_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Cosine amplitude corresponding to a spectral magnitude.
    pub fn amplitude(&self, magnitude: f64) -> f64 {
        2.0 * magnitude / self.coherent_gain
    }

    /// `(1/N) sum_k |X_k|^2` over the full two-sided transform.
    pub fn energy(&self) -> f64 {
        let n = self.fft_len;
        let last = self.magnitude.len() - 1;
        let mut e = 0.0;
        for (k, m) in self.magnitude.iter().enumerate() {
            let twice = k != 0 && !(n % 2 == 0 && k == last);
            e += if twice { 2.0 } else { 1.0 } * m * m;
        }
        e / n as f64
    }
}

/// Uniform spacing of a tau grid, or an error.
pub fn uniform_spacing(tau: &[f64]) -> Result<f64> {
    if tau.len() < 2 {
        return Err(EseemError::TraceTooShort(tau.len()));
    }
    let dt = (tau[tau.len() - 1] - tau[0]) / (tau.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(EseemError::NonUniformGrid(f64::INFINITY));
    }
    let dev = tau
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dt).abs() / dt)
        .fold(0.0_f64, f64::max);
    if dev > GRID_TOLERANCE {
        return Err(EseemError::NonUniformGrid(dev));
    }
    Ok(dt)
}

/// The mean-subtracted, windowed samples that enter the transform.
pub fn prepare(v: &[f64], window: Window) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter()
        .zip(window.coefficients(v.len()))
        .map(|(x, w)| (x - mean) * w)
        .collect()
}

pub fn fft_magnitude(trace: &EchoTrace, window: Window, zero_pad_factor: usize) -> Result<Spectrum> {
    if trace.tau_s.len() != trace.v.len() {
        return Err(EseemError::DimensionMismatch {
            expected: trace.tau_s.len(),
            actual: trace.v.len(),
        });
    }
    let dt = uniform_spacing(&trace.tau_s)?;
    if zero_pad_factor == 0 {
        return Err(EseemError::InvalidExperiment("zero_pad_factor must be >= 1".into()));
    }
    let n = trace.v.len();
    let len = n * zero_pad_factor;
    let mut buf: Vec<C64> = prepare(&trace.v, window)
        .into_iter()
        .map(|x| C64::new(x, 0.0))
        .chain(std::iter::repeat(C64::new(0.0, 0.0)))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2 + 1;
    Ok(Spectrum {
        freq_hz: (0..half).map(|k| k as f64 / (len as f64 * dt)).collect(),
        magnitude: buf[..half].iter().map(|z| z.norm()).collect(),
        window,
        zero_pad_factor,
        fft_len: len,
        coherent_gain: window.coefficients(n).iter().sum(),
        signal_scale: trace.v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    })
}

/// [`fft_magnitude`] after [`remove_baseline`]. The peak floor stays tied to the
/// raw trace, so a background that explains the whole signal yields no peaks.
pub fn baseline_spectrum(
    trace: &EchoTrace,
    baseline: Baseline,
    window: Window,
    zero_pad_factor: usize,
) -> Result<Spectrum> {
    let mut spec = fft_magnitude(&remove_baseline(trace, baseline)?, window, zero_pad_factor)?;
    spec.signal_scale = trace.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
    pub method: &'static str,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Peak closest to `freq_hz`.
    pub fn nearest(&self, freq_hz: f64) -> Option<Peak> {
        self.peaks
            .iter()
            .copied()
            .min_by(|a, b| (a.freq_hz - freq_hz).abs().total_cmp(&(b.freq_hz - freq_hz).abs()))
    }

    pub fn strongest(&self) -> Option<Peak> {
        self.peaks
            .iter()
            .copied()
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
    }
}

/// Strict interior local maxima at or above `rel_threshold * max`, refined by a
/// parabola through the logarithms of the three bins around each maximum.
/// Sorted by frequency.
pub fn find_peaks(spec: &Spectrum, rel_threshold: f64) -> PeakList {
    let m = &spec.magnitude;
    let max = m.iter().copied().fold(0.0_f64, f64::max);
    let floor = ABSOLUTE_FLOOR * spec.signal_scale * spec.coherent_gain;
    let threshold = (rel_threshold * max).max(floor);
    let df = spec.resolution_hz();
    let mut peaks = Vec::new();
    for k in 1..m.len().saturating_sub(1) {
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        if b > a && b > c && b >= threshold && b > floor {
            let (p, magnitude) = if a > 0.0 && c > 0.0 {
                let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
                let p = 0.5 * (la - lc) / (la - 2.0 * lb + lc);
                (p, (lb - 0.25 * (la - lc) * p).exp())
            } else {
                let p = 0.5 * (a - c) / (a - 2.0 * b + c);
                (p, b - 0.25 * (a - c) * p)
            };
            peaks.push(Peak {
                freq_hz: (k as f64 + p) * df,
                magnitude,
            });
        }
    }
    PeakList {
        peaks,
        method: "parabolic-interpolation local maxima (log magnitude)",
    }
}
