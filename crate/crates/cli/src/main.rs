//! `eseem`: command-line front end for two-pulse ESEEM simulation of high-spin systems.

mod commands;
mod config;
mod error;
mod io;
mod presets;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyticArgs, FitArgs, SimulateArgs, SpectrumArgs, SweepArgs, ValidateArgs};

#[derive(Debug, Parser)]
#[command(
    name = "eseem",
    version,
    about = "Two-pulse ESEEM of high-spin electron-nuclear pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Density-matrix echo trace, one file per detected projection.
    Simulate(SimulateArgs),
    /// Closed-form echo envelope.
    Analytic(AnalyticArgs),
    /// Magnitude spectrum and peak report of a trace file.
    Spectrum(SpectrumArgs),
    /// Line intensities over a grid of refocusing angles or angle spreads.
    Sweep(SweepArgs),
    /// Decay and modulation fit of a trace file.
    Fit(FitArgs),
    /// Runs the numerical self-check suite.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analytic(a) => commands::analytic(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Fit(a) => commands::fit(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
