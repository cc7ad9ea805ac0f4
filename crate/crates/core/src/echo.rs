//! Two-pulse echo propagation and projection-selective detection.
//!
//! The sequence is `theta1 - tau - theta2 - tau - detect`, starting from the
//! deviation density matrix `Sz` and detecting `Re Tr[sigma (Sy (x) P_mi)]` at
//! the refocusing instant. All propagation happens in the frame rotating at the
//! microwave frequency, which is placed `resonance_offset_hz` below the centre
//! of the detected hyperfine line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::error::{EseemError, Result};
use crate::hamiltonian::{h0_lab, h_avg_diagonal, RotatingFrameHamiltonian, SpinSystemParams};
use crate::matrix::{expm_hermitian_generator, ComplexMatrix, HermitianEigen, C64};
use crate::pulse::{rotation_operator, PulseSpec};
use crate::spin::{ProductBasis, Projection};

pub const DEFAULT_STEPS_PER_PERIOD: usize = 40;
/// Coarsest allowed substep is `1 / (MIN_STEPS_PER_PERIOD f_mw)`.
pub const MIN_STEPS_PER_PERIOD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Diagonal evolution under `h_avg0 + h_avg1`.
    AverageHamiltonian,
    /// `exp(+i w Sz (t0 + tau)) exp(-i H0 tau) exp(-i w Sz t0)` with the full lab Hamiltonian.
    ExactLabFrame,
    /// Piecewise-constant integration of the time-dependent rotating-frame Hamiltonian.
    SteppedRotatingFrame { steps_per_period: usize },
}

impl Engine {
    pub fn stepped() -> Self {
        Engine::SteppedRotatingFrame {
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::AverageHamiltonian => "average-hamiltonian",
            Engine::ExactLabFrame => "exact-lab-frame",
            Engine::SteppedRotatingFrame { .. } => "stepped-rotating-frame",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "average-hamiltonian" => Some(Engine::AverageHamiltonian),
            "exact-lab-frame" => Some(Engine::ExactLabFrame),
            "stepped-rotating-frame" => Some(Engine::stepped()),
            _ => None,
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which coherence-transfer pathways reach the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathwaySelection {
    /// Only electron coherence order `+1 -> -1` and `-1 -> +1` across the second
    /// pulse: the refocused echo, as isolated by a complete phase cycle.
    #[default]
    Echo,
    /// Every pathway, including unrefocused FID-like terms.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoExperiment {
    pub system: SpinSystemParams,
    pub pulse1: PulseSpec,
    pub pulse2: PulseSpec,
    /// Interpulse delays (s), strictly increasing and non-negative.
    pub tau_grid: Vec<f64>,
    pub detect_m_i: Projection,
    pub engine: Engine,
    /// Offset of the detected line centre above the microwave frequency (Hz).
    /// Overrides `system.f_mw_hz`.
    pub resonance_offset_hz: f64,
    /// Phenomenological decay `exp(-2 tau / T2)` when set.
    pub t2_s: Option<f64>,
    pub pathway: PathwaySelection,
}

impl EchoExperiment {
    /// Ideal-pulse, on-resonance, average-Hamiltonian experiment.
    pub fn new(
        system: SpinSystemParams,
        pulse1: PulseSpec,
        pulse2: PulseSpec,
        tau_grid: Vec<f64>,
        detect_m_i: Projection,
    ) -> Self {
        Self {
            system,
            pulse1,
            pulse2,
            tau_grid,
            detect_m_i,
            engine: Engine::AverageHamiltonian,
            resonance_offset_hz: 0.0,
            t2_s: None,
            pathway: PathwaySelection::Echo,
        }
    }

    /// `pi/2 - tau - pi - tau` with ideal x pulses.
    pub fn hahn(system: SpinSystemParams, tau_grid: Vec<f64>, detect_m_i: Projection) -> Self {
        Self::new(
            system,
            PulseSpec::ideal(PI / 2.0, 0.0),
            PulseSpec::ideal(PI, 0.0),
            tau_grid,
            detect_m_i,
        )
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_offset(mut self, offset_hz: f64) -> Self {
        self.resonance_offset_hz = offset_hz;
        self
    }

    pub fn with_t2(mut self, t2_s: f64) -> Self {
        self.t2_s = Some(t2_s);
        self
    }

    pub fn with_pathway(mut self, pathway: PathwaySelection) -> Self {
        self.pathway = pathway;
        self
    }

    /// Sets the offset so that the rotating frame runs at `f_mw_hz`.
    pub fn with_mw_frequency(mut self, f_mw_hz: f64) -> Self {
        self.resonance_offset_hz = self.system.line_center_hz(self.detect_m_i) - f_mw_hz;
        self
    }

    /// System with `f_mw_hz` placed according to `resonance_offset_hz`.
    pub fn effective_system(&self) -> SpinSystemParams {
        let center = self.system.line_center_hz(self.detect_m_i);
        self.system.with_mw_frequency(center - self.resonance_offset_hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pulse1.validate()?;
        self.pulse2.validate()?;
        if !self.system.i.admits(self.detect_m_i) {
            return Err(EseemError::InvalidProjection {
                m: self.detect_m_i.value(),
                spin: self.system.i.value(),
            });
        }
        validate_tau_grid(&self.tau_grid)?;
        if !self.resonance_offset_hz.is_finite() {
            return Err(EseemError::InvalidExperiment("non-finite resonance offset".into()));
        }
        if let Some(t2) = self.t2_s {
            if !(t2.is_finite() && t2 > 0.0) {
                return Err(EseemError::InvalidExperiment("t2_s must be positive".into()));
            }
        }
        if let Engine::SteppedRotatingFrame { steps_per_period } = self.engine {
            check_substep(&self.effective_system(), steps_per_period)?;
        }
        Ok(())
    }
}

pub fn validate_tau_grid(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(EseemError::InvalidExperiment("empty tau grid".into()));
    }
    if tau.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(EseemError::InvalidExperiment(
            "tau values must be finite and non-negative".into(),
        ));
    }
    if tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EseemError::InvalidExperiment(
            "tau grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|k| start + step * k as f64).collect()
        }
    }
}

/// Echo amplitude sampled on a tau grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EchoTrace {
    pub tau_s: Vec<f64>,
    pub v: Vec<f64>,
    /// Imaginary part of the detection trace at each point (diagnostic).
    pub v_im_residual: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl EchoTrace {
    pub fn new(tau_s: Vec<f64>, v: Vec<f64>) -> Self {
        let n = v.len();
        Self {
            tau_s,
            v,
            v_im_residual: vec![0.0; n],
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn max_im_residual(&self) -> f64 {
        self.v_im_residual.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Peak-to-peak variation of `v`.
    pub fn variation(&self) -> f64 {
        let max = self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.v.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

fn check_substep(system: &SpinSystemParams, steps_per_period: usize) -> Result<()> {
    if system.f_mw_hz <= 0.0 {
        return Err(EseemError::InvalidExperiment(
            "stepped engine needs a positive microwave frequency".into(),
        ));
    }
    let period = 1.0 / system.f_mw_hz;
    let substep = period / steps_per_period.max(1) as f64;
    let limit = period / MIN_STEPS_PER_PERIOD as f64;
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(EseemError::SubstepTooLarge {
            substep_s: substep,
            limit_s: limit,
        });
    }
    Ok(())
}

/// Free-evolution propagator source, prepared once per system.
#[derive(Debug, Clone)]
pub enum Evolver {
    Diagonal {
        energies: Vec<f64>,
    },
    Lab {
        eigen: HermitianEigen,
        sz: Vec<f64>,
        omega_mw: f64,
    },
    Stepped(SteppedIntegrator),
}

impl Evolver {
    pub fn new(engine: Engine, system: &SpinSystemParams) -> Result<Self> {
        system.validate()?;
        Ok(match engine {
            Engine::AverageHamiltonian => Evolver::Diagonal {
                energies: h_avg_diagonal(system),
            },
            Engine::ExactLabFrame => {
                let basis = system.basis();
                Evolver::Lab {
                    eigen: HermitianEigen::new(&h0_lab(system))?,
                    sz: basis.sz().diagonal().iter().map(|z| z.re).collect(),
                    omega_mw: 2.0 * PI * system.f_mw_hz,
                }
            }
            Engine::SteppedRotatingFrame { steps_per_period } => {
                check_substep(system, steps_per_period)?;
                Evolver::Stepped(SteppedIntegrator::new(system, steps_per_period)?)
            }
        })
    }

    /// Rotating-frame propagator from `t_start` to `t_start + tau`.
    pub fn propagator(&self, tau: f64, t_start: f64) -> Result<ComplexMatrix> {
        if !(tau >= 0.0) {
            return Err(EseemError::InvalidExperiment(format!("negative tau {tau}")));
        }
        Ok(match self {
            Evolver::Diagonal { energies } => {
                let d: Vec<C64> = energies.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
                ComplexMatrix::from_diagonal(&d)
            }
            Evolver::Lab { eigen, sz, omega_mw } => {
                let into = ComplexMatrix::from_diagonal(
                    &sz.iter()
                        .map(|&m| C64::from_polar(1.0, omega_mw * m * (t_start + tau)))
                        .collect::<Vec<_>>(),
                );
                let out_of = ComplexMatrix::from_diagonal(
                    &sz.iter()
                        .map(|&m| C64::from_polar(1.0, -omega_mw * m * t_start))
                        .collect::<Vec<_>>(),
                );
                &(&into * &eigen.propagator(tau)) * &out_of
            }
            Evolver::Stepped(s) => s.propagate(t_start, tau)?,
        })
    }
}

/// Midpoint-rule integrator for the periodic rotating-frame Hamiltonian.
///
/// Whole microwave periods reuse one precomputed period propagator raised to a power.
#[derive(Debug, Clone)]
pub struct SteppedIntegrator {
    hamiltonian: RotatingFrameHamiltonian,
    period: f64,
    substep: f64,
    period_propagator: ComplexMatrix,
}

impl SteppedIntegrator {
    pub fn new(system: &SpinSystemParams, steps_per_period: usize) -> Result<Self> {
        let hamiltonian = RotatingFrameHamiltonian::new(system);
        let period = 1.0 / system.f_mw_hz;
        let substep = period / steps_per_period as f64;
        let mut s = Self {
            hamiltonian,
            period,
            substep,
            period_propagator: ComplexMatrix::identity(system.basis().dim()),
        };
        s.period_propagator = s.integrate(0.0, period)?;
        Ok(s)
    }

    /// Uniform substeps no longer than `self.substep` over `[from, to]`, phases taken mod the period.
    fn integrate(&self, from: f64, to: f64) -> Result<ComplexMatrix> {
        let dim = self.period_propagator.dim();
        let span = to - from;
        if span <= 0.0 {
            return Ok(ComplexMatrix::identity(dim));
        }
        let n = (span / self.substep).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut u = ComplexMatrix::identity(dim);
        for k in 0..n {
            let t_mid = from + (k as f64 + 0.5) * h;
            let step = expm_hermitian_generator(&self.hamiltonian.at(t_mid), h)?;
            u = &step * &u;
        }
        Ok(u)
    }

    pub fn propagate(&self, t_start: f64, tau: f64) -> Result<ComplexMatrix> {
        let dim = self.period_propagator.dim();
        if tau == 0.0 {
            return Ok(ComplexMatrix::identity(dim));
        }
        if self.hamiltonian.is_static() {
            return expm_hermitian_generator(self.hamiltonian.static_part(), tau);
        }
        let t = self.period;
        let r = t_start.rem_euclid(t);
        let end = r + tau;
        if end <= t {
            return self.integrate(r, end);
        }
        let head = self.integrate(r, t)?;
        let rest = end - t;
        let full = (rest / t).floor();
        let tail_len = (rest - full * t).max(0.0);
        let tail = self.integrate(0.0, tail_len)?;
        let middle = self.period_propagator.pow(full as u64);
        Ok(&(&tail * &middle) * &head)
    }
}

/// Rotating-frame free-evolution propagator for `engine`.
pub fn free_evolution(engine: Engine, system: &SpinSystemParams, tau: f64, t_start: f64) -> Result<ComplexMatrix> {
    Evolver::new(engine, system)?.propagator(tau, t_start)
}

/// `Re Tr[sigma (Sy (x) P_mi)]`.
pub fn detect(sigma: &ComplexMatrix, system: &SpinSystemParams, m_i: Projection) -> Result<f64> {
    Ok(detect_complex(sigma, system, m_i)?.re)
}

fn detect_complex(sigma: &ComplexMatrix, system: &SpinSystemParams, m_i: Projection) -> Result<C64> {
    let basis = system.basis();
    if sigma.dim() != basis.dim() {
        return Err(EseemError::DimensionMismatch {
            expected: basis.dim(),
            actual: sigma.dim(),
        });
    }
    let scale = sigma.max_abs().max(1.0);
    let residual = sigma.hermiticity_residual();
    if residual > 1e-10 * scale {
        return Err(EseemError::NotHermitian {
            residual,
            tolerance: 1e-10 * scale,
        });
    }
    let d = basis.detection_operator(m_i)?;
    Ok((sigma * &d).trace())
}

/// `Tr[sigma_p D]` restricted to the entries of `sigma` with electron coherence order `order` (in units of 1/2).
fn detect_order(sigma: &ComplexMatrix, d: &ComplexMatrix, basis: &ProductBasis, order: i32) -> C64 {
    let n = sigma.dim();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            if basis.electron_coherence_twice(r, c) == order {
                acc += sigma.get(r, c) * d.get(c, r);
            }
        }
    }
    acc
}

/// Evaluates the experiment on its tau grid. Points are computed in parallel
/// and are independent of scheduling.
pub fn run_two_pulse_echo(exp: &EchoExperiment) -> Result<EchoTrace> {
    exp.validate()?;
    let system = exp.effective_system();
    let basis = system.basis();
    let evolver = Evolver::new(exp.engine, &system)?;
    let r1 = rotation_operator(&exp.pulse1, &system)?;
    let r2 = rotation_operator(&exp.pulse2, &system)?;
    let (d1, d2) = (exp.pulse1.total_duration(), exp.pulse2.total_duration());
    let rho1 = r1.conjugate(&basis.sz());
    let det = basis.detection_operator(exp.detect_m_i)?;

    let points: Vec<Result<(f64, f64)>> = exp
        .tau_grid
        .par_iter()
        .map(|&tau| {
            let u1 = evolver.propagator(tau, d1)?;
            let u2 = evolver.propagator(tau, d1 + tau + d2)?;
            let before = u1.conjugate(&rho1);
            let refocus = &u2 * &r2;
            let z = match exp.pathway {
                PathwaySelection::All => (&refocus.conjugate(&before) * &det).trace(),
                PathwaySelection::Echo => [2, -2]
                    .iter()
                    .map(|&p| {
                        let part = before.masked(|r, c| basis.electron_coherence_twice(r, c) == p);
                        detect_order(&refocus.conjugate(&part), &det, &basis, -p)
                    })
                    .sum(),
            };
            let damping = exp.t2_s.map_or(1.0, |t2| (-2.0 * tau / t2).exp());
            Ok((z.re * damping, z.im))
        })
        .collect();

    let mut v = Vec::with_capacity(points.len());
    let mut im = Vec::with_capacity(points.len());
    for p in points {
        let (re, i) = p?;
        v.push(re);
        im.push(i);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EseemError::InvalidExperiment("non-finite echo amplitude".into()));
    }
    let mut trace = EchoTrace {
        tau_s: exp.tau_grid.clone(),
        v,
        v_im_residual: im,
        metadata: BTreeMap::new(),
    };
    trace = trace
        .with_meta("source", "density-matrix")
        .with_meta("engine", exp.engine.name())
        .with_meta("theta1_rad", exp.pulse1.angle)
        .with_meta("theta2_rad", exp.pulse2.angle)
        .with_meta("m_i", exp.detect_m_i)
        .with_meta("resonance_offset_hz", exp.resonance_offset_hz)
        .with_meta(
            "pathway",
            match exp.pathway {
                PathwaySelection::Echo => "echo",
                PathwaySelection::All => "all",
            },
        );
    if exp.pulse2.composite.is_some() {
        trace = trace.with_meta("pulse2", "composite");
    }
    if let Some(t2) = exp.t2_s {
        trace = trace.with_meta("t2_s", t2);
    }
    Ok(trace)
}
