//! Averaging over B1 inhomogeneity and phenomenological decay.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analytic::{coefficients, outer_trace};
use crate::echo::{run_two_pulse_echo, validate_tau_grid, EchoExperiment, EchoTrace};
use crate::error::{EseemError, Result};
use crate::quadrature::{gauss_hermite, pairwise_sum};

pub const DEFAULT_QUADRATURE_NODES: usize = 41;

/// Nodes whose weight is below this fraction of the largest weight are dropped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleDistributionKind {
    Point,
    Gaussian,
}

/// Distribution of the refocusing angle `theta2` across the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleDistribution {
    pub kind: AngleDistributionKind,
    pub mean: f64,
    pub sigma: f64,
    pub quadrature_nodes: usize,
}

impl AngleDistribution {
    pub fn point(mean: f64) -> Self {
        Self {
            kind: AngleDistributionKind::Point,
            mean,
            sigma: 0.0,
            quadrature_nodes: 1,
        }
    }

    pub fn gaussian(mean: f64, sigma: f64) -> Self {
        Self {
            kind: AngleDistributionKind::Gaussian,
            mean,
            sigma,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.quadrature_nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean > 0.0 && self.mean <= TAU) {
            return Err(EseemError::InvalidDistribution(format!(
                "mean {} outside (0, 2pi]",
                self.mean
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(EseemError::InvalidDistribution("sigma must be >= 0".into()));
        }
        if self.kind == AngleDistributionKind::Gaussian && (self.quadrature_nodes < 3 || self.quadrature_nodes % 2 == 0)
        {
            return Err(EseemError::InvalidDistribution(format!(
                "quadrature nodes must be odd and >= 3, got {}",
                self.quadrature_nodes
            )));
        }
        Ok(())
    }

    /// Sample angles and normalized weights of the quadrature rule.
    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        if self.kind == AngleDistributionKind::Point || self.sigma == 0.0 {
            return Ok(vec![(self.mean, 1.0)]);
        }
        let (x, w) = gauss_hermite(self.quadrature_nodes)?;
        let w_max = w.iter().copied().fold(0.0, f64::max);
        Ok(x.iter()
            .zip(&w)
            .filter(|(_, &w)| w >= NEGLIGIBLE_WEIGHT * w_max)
            .map(|(&x, &w)| (self.mean + 2f64.sqrt() * self.sigma * x, w / PI.sqrt()))
            .collect())
    }

    fn rule_name(&self) -> String {
        match self.kind {
            AngleDistributionKind::Point => "point".into(),
            AngleDistributionKind::Gaussian => format!("gauss-hermite-{}", self.quadrature_nodes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SamplingMethod {
    #[default]
    Quadrature,
    /// Plain Monte Carlo with equal weights; reproducible for a given seed.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnsembleOptions {
    /// Scale `theta1` by the same B1 factor as `theta2`.
    pub shared_b1: bool,
    pub method: SamplingMethod,
}

/// What to average.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    /// Density-matrix simulation. Sampled angles replace `pulse2.angle`, and
    /// composite segments scale with it.
    Numeric(EchoExperiment),
    /// Closed-form outer-line envelope.
    AnalyticOuter {
        tau_s: Vec<f64>,
        theta1: f64,
        delta_hz: f64,
    },
}

impl TraceSource {
    fn tau(&self) -> &[f64] {
        match self {
            TraceSource::Numeric(e) => &e.tau_grid,
            TraceSource::AnalyticOuter { tau_s, .. } => tau_s,
        }
    }

    /// Trace at refocusing angle `theta2` with `theta1` scaled by `theta1_factor`.
    fn evaluate(&self, theta2: f64, theta1_factor: f64) -> Result<Vec<f64>> {
        match self {
            TraceSource::Numeric(exp) => {
                if !(theta2 > 0.0 && theta2 <= TAU) {
                    return Err(EseemError::InvalidDistribution(format!(
                        "sampled theta2 = {theta2} outside (0, 2pi]; reduce sigma"
                    )));
                }
                let mut e = exp.clone();
                e.pulse2 = exp.pulse2.scaled(theta2 / exp.pulse2.angle);
                if theta1_factor != 1.0 {
                    e.pulse1 = exp.pulse1.scaled(theta1_factor);
                }
                Ok(run_two_pulse_echo(&e)?.v)
            }
            TraceSource::AnalyticOuter {
                tau_s,
                theta1,
                delta_hz,
            } => Ok(outer_trace(tau_s, theta1 * theta1_factor, theta2, *delta_hz).v),
        }
    }
}

fn samples(dist: &AngleDistribution, method: SamplingMethod) -> Result<Vec<(f64, f64)>> {
    match method {
        SamplingMethod::Quadrature => dist.nodes(),
        SamplingMethod::MonteCarlo { samples, seed } => {
            dist.validate()?;
            if samples == 0 {
                return Err(EseemError::InvalidDistribution("Monte Carlo needs samples > 0".into()));
            }
            let normal =
                Normal::new(dist.mean, dist.sigma).map_err(|e| EseemError::InvalidDistribution(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = 1.0 / samples as f64;
            Ok((0..samples).map(|_| (normal.sample(&mut rng), w)).collect())
        }
    }
}

/// Expectation of the trace over `dist` applied to `theta2`. With `shared_b1`
/// the first pulse is scaled by `theta2 / dist.mean`.
pub fn average_trace(source: &TraceSource, dist: &AngleDistribution, options: EnsembleOptions) -> Result<EchoTrace> {
    validate_tau_grid(source.tau())?;
    let nodes = samples(dist, options.method)?;
    let traces: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&(theta, _)| {
            let f = if options.shared_b1 { theta / dist.mean } else { 1.0 };
            source.evaluate(theta, f)
        })
        .collect::<Result<_>>()?;
    let n_tau = source.tau().len();
    let mut column = vec![0.0; nodes.len()];
    let v: Vec<f64> = (0..n_tau)
        .map(|k| {
            for (c, (tr, (_, w))) in column.iter_mut().zip(traces.iter().zip(&nodes)) {
                *c = w * tr[k];
            }
            pairwise_sum(&column)
        })
        .collect();
    let rule = match options.method {
        SamplingMethod::Quadrature => dist.rule_name(),
        SamplingMethod::MonteCarlo { samples, seed } => format!("monte-carlo-{samples}-seed-{seed}"),
    };
    Ok(EchoTrace::new(source.tau().to_vec(), v)
        .with_meta("source", "ensemble")
        .with_meta("rule", rule)
        .with_meta("nodes", nodes.len())
        .with_meta("theta2_mean_rad", dist.mean)
        .with_meta("theta2_sigma_rad", dist.sigma)
        .with_meta("shared_b1", options.shared_b1))
}

/// `|E[w A1]| / |E[w A2]|` with `w = sin(theta1) sin^2(theta2/2)`, i.e. the
/// ratio of the `delta` and `2 delta` amplitudes of the averaged outer-line trace.
pub fn i1_i2_ratio(dist: &AngleDistribution) -> Result<f64> {
    i1_i2_ratio_with(dist, EnsembleOptions::default())
}

pub fn i1_i2_ratio_with(dist: &AngleDistribution, options: EnsembleOptions) -> Result<f64> {
    let nodes = samples(dist, options.method)?;
    let (mut i1, mut i2) = (Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len()));
    for &(theta, w) in &nodes {
        let theta1 = if options.shared_b1 {
            PI / 2.0 * theta / dist.mean
        } else {
            PI / 2.0
        };
        let pre = theta1.sin() * (theta / 2.0).sin().powi(2);
        let k = coefficients(theta);
        i1.push(w * pre * k.a1);
        i2.push(w * pre * k.a2);
    }
    let (i1, i2) = (pairwise_sum(&i1), pairwise_sum(&i2));
    if i2 == 0.0 {
        return Err(EseemError::InvalidDistribution("2 delta component vanishes".into()));
    }
    Ok((i1 / i2).abs())
}

/// Multiplies by `exp(-2 tau / T2)`.
pub fn apply_t2(trace: &EchoTrace, t2_s: f64) -> Result<EchoTrace> {
    if !(t2_s.is_finite() && t2_s > 0.0) {
        return Err(EseemError::InvalidExperiment("t2_s must be positive".into()));
    }
    let mut out = trace.clone();
    for (v, t) in out.v.iter_mut().zip(&trace.tau_s) {
        *v *= (-2.0 * t / t2_s).exp();
    }
    Ok(out.with_meta("t2_s", t2_s))
}
