//! Run configuration: a TOML document with `system`, `sequence`, `tau`,
//! `ensemble`, `analytic` and `output` tables. Angles are in degrees.

use std::path::{Path, PathBuf};

use eseem_core::ensemble::{AngleDistribution, DEFAULT_QUADRATURE_NODES};
use eseem_core::pulse::PulseSegment;
use eseem_core::{EchoExperiment, Engine, Projection, PulseSpec, SpinQuantumNumber, SpinSystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_engine")]
    pub engine: String,
    #[serde(default)]
    pub detect_m_i: DetectMi,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_s: Option<f64>,
    pub system: SystemConfig,
    #[serde(default)]
    pub sequence: SequenceConfig,
    pub tau: TauConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub analytic: AnalyticConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_engine() -> String {
    Engine::AverageHamiltonian.name().to_string()
}

/// One nuclear projection or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectMi {
    One(f64),
    Many(Vec<f64>),
}

impl Default for DetectMi {
    fn default() -> Self {
        DetectMi::One(1.0)
    }
}

impl DetectMi {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DetectMi::One(m) => vec![*m],
            DetectMi::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub s: f64,
    pub i: f64,
    pub a_hz: f64,
    pub f_e_hz: f64,
    pub f_i_hz: f64,
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_mw_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_offset_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    #[default]
    Ideal,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub angle_deg: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

/// `"pi"` for the built-in composite, or explicit segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CompositeConfig {
    Named(String),
    Segments(Vec<SegmentConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    #[serde(default = "default_theta1")]
    pub theta1_deg: f64,
    #[serde(default = "default_theta2")]
    pub theta2_deg: f64,
    /// Phase of the refocusing pulse relative to the first pulse.
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default)]
    pub pulse: PulseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse1_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse2_duration_s: Option<f64>,
    /// Replaces the refocusing pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeConfig>,
}

fn default_theta1() -> f64 {
    90.0
}

fn default_theta2() -> f64 {
    180.0
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            theta1_deg: default_theta1(),
            theta2_deg: default_theta2(),
            phase_deg: 0.0,
            pulse: PulseKind::Ideal,
            pulse1_duration_s: None,
            pulse2_duration_s: None,
            composite: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub start_s: f64,
    pub stop_s: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub sigma_rad: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub shared_b1: bool,
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticMode {
    /// Outer lines of an S = 3/2, I = 1 pair.
    #[default]
    Outer,
    /// Central line, independent of tau.
    Center,
    /// Perfect-refocusing envelope for any S.
    General,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    #[serde(default)]
    pub mode: AnalyticMode,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    /// Adds the `v_im_residual` column.
    #[serde(default)]
    pub im_residual: bool,
}

fn field(name: &str, reason: impl Into<String>) -> CliError {
    CliError::Field {
        field: name.to_string(),
        reason: reason.into(),
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field(name, "must be finite"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical TOML form, used for the provenance echo.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        for (name, v) in [
            ("system.a_hz", s.a_hz),
            ("system.f_e_hz", s.f_e_hz),
            ("system.f_i_hz", s.f_i_hz),
            ("system.g", s.g),
        ] {
            finite(name, v)?;
        }
        match (s.f_mw_hz, s.resonance_offset_hz) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(field(
                    "system",
                    "exactly one of f_mw_hz and resonance_offset_hz must be given",
                ))
            }
            (Some(f), None) => {
                finite("system.f_mw_hz", f)?;
            }
            (None, Some(o)) => {
                finite("system.resonance_offset_hz", o)?;
            }
        }
        let t = &self.tau;
        if t.points < 2 {
            return Err(field("tau.points", "must be >= 2"));
        }
        finite("tau.start_s", t.start_s)?;
        finite("tau.stop_s", t.stop_s)?;
        if t.start_s < 0.0 {
            return Err(field("tau.start_s", "must be >= 0"));
        }
        if t.stop_s <= t.start_s {
            return Err(field("tau.stop_s", "must exceed tau.start_s"));
        }
        let q = &self.sequence;
        finite("sequence.theta1_deg", q.theta1_deg)?;
        finite("sequence.theta2_deg", q.theta2_deg)?;
        finite("sequence.phase_deg", q.phase_deg)?;
        if q.pulse == PulseKind::Finite {
            for (name, d) in [
                ("sequence.pulse1_duration_s", q.pulse1_duration_s),
                ("sequence.pulse2_duration_s", q.pulse2_duration_s),
            ] {
                match d {
                    Some(d) if d.is_finite() && d > 0.0 => {}
                    _ => return Err(field(name, "finite pulses need a positive duration")),
                }
            }
        }
        if let Some(CompositeConfig::Named(name)) = &q.composite {
            if name != "pi" {
                return Err(field("sequence.composite", format!("unknown composite `{name}`")));
            }
        }
        if Engine::from_name(&self.engine).is_none() {
            return Err(field("engine", format!("unknown engine `{}`", self.engine)));
        }
        if self.detect_m_i.values().is_empty() {
            return Err(field("detect_m_i", "at least one projection is required"));
        }
        if let Some(t2) = self.t2_s {
            if !(t2 > 0.0 && t2.is_finite()) {
                return Err(field("t2_s", "must be positive"));
            }
        }
        if let Some(e) = &self.ensemble {
            if !(e.sigma_rad >= 0.0 && e.sigma_rad.is_finite()) {
                return Err(field("ensemble.sigma_rad", "must be >= 0"));
            }
            if e.nodes < 3 || e.nodes % 2 == 0 {
                return Err(field("ensemble.nodes", "must be odd and >= 3"));
            }
        }
        self.system_params()?;
        self.projections()?;
        Ok(())
    }

    pub fn system_params(&self) -> Result<SpinSystemParams, CliError> {
        let s = &self.system;
        let spin = |name: &str, v: f64| SpinQuantumNumber::from_value(v).map_err(|e| field(name, e.to_string()));
        let params = SpinSystemParams {
            s: spin("system.s", s.s)?,
            i: spin("system.i", s.i)?,
            a_hz: s.a_hz,
            f_e_hz: s.f_e_hz,
            f_i_hz: s.f_i_hz,
            g: s.g,
            f_mw_hz: s.f_e_hz,
        };
        params.validate().map_err(|e| field("system", e.to_string()))?;
        Ok(params)
    }

    pub fn projections(&self) -> Result<Vec<Projection>, CliError> {
        let i = self.system_params()?.i;
        self.detect_m_i
            .values()
            .into_iter()
            .map(|m| {
                let p = Projection::from_value(m).map_err(|e| field("detect_m_i", e.to_string()))?;
                if i.admits(p) {
                    Ok(p)
                } else {
                    Err(field(
                        "detect_m_i",
                        format!("{m} is not a projection of I = {}", i.value()),
                    ))
                }
            })
            .collect()
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        eseem_core::echo::linspace(self.tau.start_s, self.tau.stop_s, self.tau.points)
    }

    pub fn theta1(&self) -> f64 {
        self.sequence.theta1_deg.to_radians()
    }

    pub fn theta2(&self) -> f64 {
        self.sequence.theta2_deg.to_radians()
    }

    pub fn engine(&self) -> Engine {
        Engine::from_name(&self.engine).expect("validated engine name")
    }

    fn pulses(&self) -> (PulseSpec, PulseSpec) {
        let q = &self.sequence;
        let (phase1, phase2) = (0.0, q.phase_deg.to_radians());
        let (p1, mut p2) = match q.pulse {
            PulseKind::Ideal => (
                PulseSpec::ideal(self.theta1(), phase1),
                PulseSpec::ideal(self.theta2(), phase2),
            ),
            PulseKind::Finite => (
                PulseSpec::finite(self.theta1(), phase1, q.pulse1_duration_s.unwrap_or_default()),
                PulseSpec::finite(self.theta2(), phase2, q.pulse2_duration_s.unwrap_or_default()),
            ),
        };
        match &q.composite {
            None => {}
            Some(CompositeConfig::Named(_)) => {
                p2 = p2.with_composite(eseem_core::pulse::default_composite_pi_segments());
            }
            Some(CompositeConfig::Segments(segs)) => {
                p2 = p2.with_composite(
                    segs.iter()
                        .map(|s| PulseSegment {
                            angle: s.angle_deg.to_radians(),
                            phase: s.phase_deg.to_radians(),
                        })
                        .collect(),
                );
            }
        }
        (p1, p2)
    }

    pub fn experiment(&self, m_i: Projection) -> Result<EchoExperiment, CliError> {
        let (p1, p2) = self.pulses();
        let mut exp =
            EchoExperiment::new(self.system_params()?, p1, p2, self.tau_grid(), m_i).with_engine(self.engine());
        exp = match (self.system.f_mw_hz, self.system.resonance_offset_hz) {
            (Some(f), _) => exp.with_mw_frequency(f),
            (None, offset) => exp.with_offset(offset.unwrap_or_default()),
        };
        if let Some(t2) = self.t2_s {
            exp = exp.with_t2(t2);
        }
        exp.validate().map_err(|e| field("sequence", e.to_string()))?;
        Ok(exp)
    }

    /// Spread of the refocusing angle, if any.
    pub fn distribution(&self) -> Option<AngleDistribution> {
        self.ensemble
            .as_ref()
            .filter(|e| e.sigma_rad > 0.0)
            .map(|e| AngleDistribution::gaussian(self.theta2(), e.sigma_rad).with_nodes(e.nodes))
    }

    pub fn shared_b1(&self) -> bool {
        self.ensemble.as_ref().is_some_and(|e| e.shared_b1)
    }
}
