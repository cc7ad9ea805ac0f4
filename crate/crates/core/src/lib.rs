//! Simulation and analysis of electron-spin-echo envelope modulation from an
//! isotropic hyperfine interaction in high-spin (S > 1/2) systems.

pub mod aht;
pub mod analytic;
pub mod echo;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod matrix;
pub mod pulse;
pub mod quadrature;
pub mod spectral;
pub mod spin;
pub mod validation;

pub use echo::{run_two_pulse_echo, EchoExperiment, EchoTrace, Engine, PathwaySelection};
pub use ensemble::{average_trace, AngleDistribution, EnsembleOptions, TraceSource};
pub use error::{EseemError, Result};
pub use fit::{fit_decay, DecayModel, FitResult};
pub use hamiltonian::SpinSystemParams;
pub use matrix::{ComplexMatrix, C64};
pub use pulse::PulseSpec;
pub use spectral::{
    baseline_spectrum, fft_magnitude, find_peaks, remove_baseline, Baseline, PeakList, Spectrum, Window,
};
pub use spin::{Projection, SpinQuantumNumber};
