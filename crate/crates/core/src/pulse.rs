//! Microwave pulses and their rotation operators.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{EseemError, Result};
use crate::hamiltonian::{h_avg_diagonal, SpinSystemParams};
use crate::matrix::{expm_hermitian_generator, ComplexMatrix};
use crate::spin::spin_matrices;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseModel {
    /// Instantaneous rotation of the electron spin; identity on the nucleus.
    Ideal,
    /// Rectangular pulse of the given length driven under the average Hamiltonian.
    Finite { duration_s: f64 },
}

/// One element of a composite pulse. `phase` is relative to the parent pulse phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSegment {
    pub angle: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    /// Nominal rotation angle (rad). For composite pulses this is the angle the
    /// composite replaces, used for B1 scaling and pulse timing.
    pub angle: f64,
    /// Rotation axis angle in the transverse plane, measured from x.
    pub phase: f64,
    pub model: PulseModel,
    pub composite: Option<Vec<PulseSegment>>,
}

impl PulseSpec {
    pub fn ideal(angle: f64, phase: f64) -> Self {
        Self {
            angle,
            phase,
            model: PulseModel::Ideal,
            composite: None,
        }
    }

    pub fn finite(angle: f64, phase: f64, duration_s: f64) -> Self {
        Self {
            angle,
            phase,
            model: PulseModel::Finite { duration_s },
            composite: None,
        }
    }

    pub fn with_composite(mut self, segments: Vec<PulseSegment>) -> Self {
        self.composite = Some(segments);
        self
    }

    /// `(pi/2)_x (pi)_y (pi/2)_x`, replacing a pi pulse.
    pub fn composite_pi() -> Self {
        Self::ideal(PI, 0.0).with_composite(default_composite_pi_segments())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle.is_finite() && self.angle > 0.0 && self.angle <= 2.0 * PI + 1e-12) {
            return Err(EseemError::InvalidPulse(format!(
                "angle {} rad outside (0, 2 pi]",
                self.angle
            )));
        }
        if !self.phase.is_finite() {
            return Err(EseemError::InvalidPulse("non-finite phase".into()));
        }
        if let PulseModel::Finite { duration_s } = self.model {
            if !(duration_s.is_finite() && duration_s > 0.0) {
                return Err(EseemError::InvalidPulse(
                    "finite pulse needs a positive duration".into(),
                ));
            }
        }
        if let Some(segs) = &self.composite {
            if segs.is_empty() {
                return Err(EseemError::InvalidPulse("empty composite segment list".into()));
            }
            if segs.iter().any(|s| !(s.angle.is_finite() && s.phase.is_finite())) {
                return Err(EseemError::InvalidPulse("non-finite composite segment".into()));
            }
        }
        Ok(())
    }

    /// Segments in application order with absolute phases.
    pub fn segments(&self) -> Vec<PulseSegment> {
        match &self.composite {
            None => vec![PulseSegment {
                angle: self.angle,
                phase: self.phase,
            }],
            Some(segs) => segs
                .iter()
                .map(|s| PulseSegment {
                    angle: s.angle,
                    phase: s.phase + self.phase,
                })
                .collect(),
        }
    }

    /// The same pulse under a B1 field scaled by `factor`; durations are unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.angle *= factor;
        if let Some(segs) = out.composite.as_mut() {
            for s in segs {
                s.angle *= factor;
            }
        }
        out
    }

    /// Nutation frequency (rad/s) of a finite pulse.
    pub fn nutation_rate(&self) -> Option<f64> {
        match self.model {
            PulseModel::Ideal => None,
            PulseModel::Finite { duration_s } => Some(self.angle / duration_s),
        }
    }

    /// Wall-clock length; zero for ideal pulses.
    pub fn total_duration(&self) -> f64 {
        match self.model {
            PulseModel::Ideal => 0.0,
            PulseModel::Finite { duration_s } => {
                let nominal = self.angle.abs();
                self.segments()
                    .iter()
                    .map(|s| duration_s * s.angle.abs() / nominal)
                    .sum()
            }
        }
    }
}

pub fn default_composite_pi_segments() -> Vec<PulseSegment> {
    vec![
        PulseSegment {
            angle: FRAC_PI_2,
            phase: 0.0,
        },
        PulseSegment {
            angle: PI,
            phase: FRAC_PI_2,
        },
        PulseSegment {
            angle: FRAC_PI_2,
            phase: 0.0,
        },
    ]
}

/// `exp(-i angle (Sx cos phase + Sy sin phase))` on the electron space alone.
pub fn electron_rotation(s: crate::spin::SpinQuantumNumber, angle: f64, phase: f64) -> ComplexMatrix {
    let m = spin_matrices(s);
    let axis = &m.x.scale_real(phase.cos()) + &m.y.scale_real(phase.sin());
    expm_hermitian_generator(&axis, angle).expect("spin matrices are Hermitian")
}

/// Full-space propagator of `pulse` for `system` (rotating frame at `system.f_mw_hz`).
///
/// Ideal pulses are `R (x) 1_nuclear`. Finite pulses evolve under
/// `h_avg0 + h_avg1 + omega_1 (Sx cos phase + Sy sin phase)` for each segment.
pub fn rotation_operator(pulse: &PulseSpec, system: &SpinSystemParams) -> Result<ComplexMatrix> {
    pulse.validate()?;
    let basis = system.basis();
    match pulse.model {
        PulseModel::Ideal => {
            let mut r = ComplexMatrix::identity(system.s.multiplicity());
            for seg in pulse.segments() {
                r = &electron_rotation(system.s, seg.angle, seg.phase) * &r;
            }
            Ok(basis.electron(&r))
        }
        PulseModel::Finite { duration_s } => {
            let h0 = ComplexMatrix::from_real_diagonal(&h_avg_diagonal(system));
            let omega1 = pulse.angle / duration_s;
            let (sx, sy) = (basis.sx(), basis.sy());
            let mut r = ComplexMatrix::identity(basis.dim());
            for seg in pulse.segments() {
                let t = seg.angle.abs() / omega1.abs();
                let drive = (&sx.scale_real(seg.phase.cos()) + &sy.scale_real(seg.phase.sin()))
                    .scale_real(omega1 * seg.angle.signum());
                let u = expm_hermitian_generator(&(&h0 + &drive), t)?;
                r = &u * &r;
            }
            Ok(r)
        }
    }
}
