use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use eseem_core::analytic::{self, center_trace, coefficients, general_coefficients, general_trace, outer_trace};
use eseem_core::ensemble::{apply_t2, average_trace, EnsembleOptions, TraceSource};
use eseem_core::validation::{registry, run_checks, ValidationReport};
use eseem_core::{
    baseline_spectrum, find_peaks, fit_decay, run_two_pulse_echo, Baseline, DecayModel, EchoTrace, Projection,
    Spectrum, SpinQuantumNumber, Window,
};
use serde::Serialize;

use crate::config::{AnalyticMode, EnsembleConfig, RunConfig};
use crate::error::CliError;
use crate::io::{compact, emit, number, read_trace, trace_document, with_projection_suffix, CsvDocument};
use crate::presets::preset;
use crate::svg::line_plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled configuration (nc60, nc60_mi_minus1, nc60_mi_0, nc60_composite, theta2_120).
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
}

impl Source {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path),
            (None, Some(name)) => preset(name),
            (None, None) => Err(CliError::Config("one of --config or --preset is required".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output file; stdout when omitted. Several projections get `_mi<M>` suffixes.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write an SVG line plot.
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

fn trace_svg(trace: &EchoTrace, title: &str) -> String {
    let us: Vec<f64> = trace.tau_s.iter().map(|t| t * 1e6).collect();
    line_plot(&us, &trace.v, title, "tau (us)", "echo amplitude")
}

fn spectrum_svg(spec: &Spectrum, title: &str) -> String {
    let khz: Vec<f64> = spec.freq_hz.iter().map(|f| f / 1e3).collect();
    line_plot(&khz, &spec.magnitude, title, "frequency (kHz)", "magnitude")
}

fn target(base: Option<&Path>, m: Projection, several: bool) -> Option<PathBuf> {
    base.map(|p| {
        if several {
            with_projection_suffix(p, m)
        } else {
            p.to_path_buf()
        }
    })
}

fn write_trace(
    doc: CsvDocument,
    trace: &EchoTrace,
    out: Option<PathBuf>,
    svg: Option<PathBuf>,
    title: &str,
) -> Result<(), CliError> {
    emit(out.as_deref(), &doc.render())?;
    if let Some(p) = &out {
        eprintln!("wrote {} ({} points)", p.display(), trace.len());
    }
    if let Some(p) = svg {
        emit(Some(&p), &trace_svg(trace, title))?;
    }
    Ok(())
}

fn simulate_one(cfg: &RunConfig, m: Projection) -> Result<EchoTrace, CliError> {
    let exp = cfg.experiment(m)?;
    let trace = match cfg.distribution() {
        Some(dist) => average_trace(
            &TraceSource::Numeric(exp),
            &dist,
            EnsembleOptions {
                shared_b1: cfg.shared_b1(),
                ..Default::default()
            },
        )?,
        None => run_two_pulse_echo(&exp)?,
    };
    Ok(trace)
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    /// Overrides the configured engine.
    #[arg(long)]
    pub engine: Option<String>,
    /// Adds the `v_im_residual` column.
    #[arg(long)]
    pub im_residual: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = args.source.load()?;
    if let Some(engine) = &args.engine {
        cfg.engine = engine.clone();
        cfg.validate()?;
    }
    let out = args.output.out.clone().or_else(|| cfg.output.trace.clone());
    let svg = args.output.svg.clone().or_else(|| cfg.output.svg.clone());
    let im = args.im_residual || cfg.output.im_residual;
    let projections = cfg.projections()?;
    let several = projections.len() > 1;
    if several && out.is_none() && svg.is_some() {
        return Err(CliError::Config(
            "several projections need --out to name the SVG files".into(),
        ));
    }
    for m in projections {
        let trace = simulate_one(&cfg, m)?;
        let mut doc = trace_document("simulate", &trace, im);
        doc.config_echo(&cfg.to_toml());
        doc.comment(format!("m_i: {m}"));
        doc.metadata(&trace.metadata);
        write_trace(
            doc,
            &trace,
            target(out.as_deref(), m, several),
            target(svg.as_deref(), m, several),
            &format!("two-pulse echo, M_I = {m}"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    /// Overrides `analytic.mode`.
    #[arg(long, value_enum)]
    pub mode: Option<AnalyticMode>,
}

fn require_outer_system(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.system_params()?;
    if p.s != SpinQuantumNumber::THREE_HALVES || p.i != SpinQuantumNumber::ONE {
        return Err(CliError::Field {
            field: "analytic.mode".into(),
            reason: "outer and center modes need s = 1.5 and i = 1; use mode = \"general\"".into(),
        });
    }
    Ok(())
}

fn finish(trace: EchoTrace, cfg: &RunConfig) -> Result<EchoTrace, CliError> {
    Ok(match cfg.t2_s {
        Some(t2) => apply_t2(&trace, t2)?,
        None => trace,
    })
}

pub fn analytic(args: &AnalyticArgs) -> Result<(), CliError> {
    let cfg = args.source.load()?;
    let mode = args.mode.unwrap_or(cfg.analytic.mode);
    let out = args.output.out.clone().or_else(|| cfg.output.trace.clone());
    let svg = args.output.svg.clone().or_else(|| cfg.output.svg.clone());
    let p = cfg.system_params()?;
    let delta = p.delta_hz();
    let tau = cfg.tau_grid();
    let (theta1, theta2) = (cfg.theta1(), cfg.theta2());
    let header = |doc: &mut CsvDocument, trace: &EchoTrace| {
        doc.config_echo(&cfg.to_toml());
        doc.comment(format!("mode: {mode:?}").to_lowercase());
        doc.metadata(&trace.metadata);
    };
    match mode {
        AnalyticMode::Outer | AnalyticMode::Center => {
            require_outer_system(&cfg)?;
            let k = coefficients(theta2);
            let trace = match (mode, cfg.distribution()) {
                (AnalyticMode::Outer, Some(dist)) => average_trace(
                    &TraceSource::AnalyticOuter {
                        tau_s: tau.clone(),
                        theta1,
                        delta_hz: delta,
                    },
                    &dist,
                    EnsembleOptions {
                        shared_b1: cfg.shared_b1(),
                        ..Default::default()
                    },
                )?,
                (AnalyticMode::Outer, None) => outer_trace(&tau, theta1, theta2, delta),
                (_, Some(dist)) => {
                    let mut v = 0.0;
                    for (theta, w) in dist.nodes()? {
                        let t1 = if cfg.shared_b1() {
                            theta1 * theta / theta2
                        } else {
                            theta1
                        };
                        v += w * analytic::v_center(t1, theta);
                    }
                    let mut t = center_trace(&tau, theta1, theta2);
                    t.v = vec![v; tau.len()];
                    t.with_meta("rule", "gauss-hermite")
                }
                (_, None) => center_trace(&tau, theta1, theta2),
            };
            let trace = finish(trace, &cfg)?;
            let mut doc = trace_document("analytic", &trace, false);
            header(&mut doc, &trace);
            doc.comment(format!(
                "coefficients: a0={} a1={} a2={}",
                compact(k.a0),
                compact(k.a1),
                compact(k.a2)
            ));
            write_trace(
                doc,
                &trace,
                out,
                svg,
                &format!("closed-form echo ({mode:?})").to_lowercase(),
            )
        }
        AnalyticMode::General => {
            let projections = cfg.projections()?;
            let several = projections.len() > 1;
            let coeffs = general_coefficients(p.s);
            let values: Vec<String> = coeffs.iter().map(|(_, w)| compact(*w)).collect();
            let labels: Vec<String> = coeffs.iter().map(|(m, _)| m.to_string()).collect();
            for m in projections {
                let trace = finish(general_trace(p.s, m, &tau, delta), &cfg)?;
                let mut doc = trace_document("analytic", &trace, cfg.output.im_residual);
                header(&mut doc, &trace);
                if cfg.distribution().is_some() {
                    doc.comment("note: ensemble ignored, general mode assumes perfect refocusing");
                }
                doc.comment(format!("coefficients: {}", values.join(",")));
                doc.comment(format!("coefficient_m_s: {}", labels.join(",")));
                write_trace(
                    doc,
                    &trace,
                    target(out.as_deref(), m, several),
                    target(svg.as_deref(), m, several),
                    &format!("perfect-refocusing envelope, S = {}, M_I = {m}", p.s.value()),
                )?;
            }
            Ok(())
        }
    }
}

pub fn parse_window(s: &str) -> Result<Window, String> {
    Window::from_name(s).ok_or_else(|| format!("unknown window `{s}` (hann, rectangular)"))
}

pub fn parse_baseline(s: &str) -> Result<Baseline, String> {
    Baseline::from_name(s).ok_or_else(|| format!("unknown baseline `{s}` (mean, exp)"))
}

pub fn parse_model(s: &str) -> Result<DecayModel, String> {
    DecayModel::from_name(s).ok_or_else(|| format!("unknown model `{s}` (exp, exp-two-cosine)"))
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    /// Trace CSV with `tau_s` and `v` columns.
    pub input: PathBuf,
    #[command(flatten)]
    pub output: Output,
    #[arg(long, default_value = "hann", value_parser = parse_window)]
    pub window: Window,
    #[arg(long, default_value_t = eseem_core::spectral::DEFAULT_ZERO_PAD)]
    pub zero_pad: usize,
    /// Background removed before the transform.
    #[arg(long, default_value = "exp", value_parser = parse_baseline)]
    pub baseline: Baseline,
    /// Peak threshold relative to the largest magnitude.
    #[arg(long, default_value_t = eseem_core::spectral::DEFAULT_REL_THRESHOLD)]
    pub threshold: f64,
    /// Print the peak report as JSON on stdout; the CSV is written only with --out.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct PeakReport<'a> {
    input: String,
    window: Window,
    zero_pad: usize,
    baseline: Baseline,
    threshold: f64,
    resolution_hz: f64,
    peaks: &'a [eseem_core::spectral::Peak],
}

pub fn spectrum(args: &SpectrumArgs) -> Result<(), CliError> {
    if !(args.threshold >= 0.0 && args.threshold <= 1.0) {
        return Err(CliError::Config("--threshold must lie in [0, 1]".into()));
    }
    let trace = read_trace(&args.input)?;
    let spec = baseline_spectrum(&trace, args.baseline, args.window, args.zero_pad)?;
    let peaks = find_peaks(&spec, args.threshold);
    let input = args
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut doc = CsvDocument::new("spectrum", &["freq_hz", "magnitude"]);
    doc.comment(format!("input: {input}"));
    doc.comment(format!("window: {}", args.window));
    doc.comment(format!("zero_pad: {}", args.zero_pad));
    doc.comment(format!("baseline: {}", args.baseline));
    doc.comment(format!("fft_len: {}", spec.fft_len));
    doc.comment(format!("resolution_hz: {}", number(spec.resolution_hz())));
    doc.comment(format!("peaks: {} ({})", peaks.len(), peaks.method));
    for p in &peaks.peaks {
        doc.comment(format!(
            "peak: freq_hz={} magnitude={}",
            number(p.freq_hz),
            number(p.magnitude)
        ));
    }
    doc.rows = spec
        .freq_hz
        .iter()
        .zip(&spec.magnitude)
        .map(|(f, m)| vec![*f, *m])
        .collect();

    if args.json {
        let report = PeakReport {
            input,
            window: args.window,
            zero_pad: args.zero_pad,
            baseline: args.baseline,
            threshold: args.threshold,
            resolution_hz: spec.resolution_hz(),
            peaks: &peaks.peaks,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        if let Some(p) = &args.output.out {
            emit(Some(p), &doc.render())?;
        }
    } else {
        emit(args.output.out.as_deref(), &doc.render())?;
        eprintln!("{} peak(s)", peaks.len());
        for p in &peaks.peaks {
            eprintln!("  {:>12.1} Hz  magnitude {:.4e}", p.freq_hz, p.magnitude);
        }
    }
    if let Some(p) = &args.output.svg {
        emit(
            Some(p),
            &spectrum_svg(&spec, &format!("magnitude spectrum of {}", args.input.display())),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Refocusing angle in degrees.
    Theta2,
    /// Gaussian spread of the refocusing angle in radians.
    Sigma,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Print the rows as JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub i_delta: f64,
    pub i_2delta: f64,
    pub ratio: f64,
}

/// Largest magnitude within 5% of `freq`.
fn band_max(spec: &Spectrum, freq: f64) -> f64 {
    spec.freq_hz
        .iter()
        .zip(&spec.magnitude)
        .filter(|(f, _)| (**f - freq).abs() <= 0.05 * freq)
        .fold(0.0_f64, |m, (_, v)| m.max(*v))
}

/// Line intensities at `delta` and `2 delta` for each grid value, detected on
/// the first configured projection.
pub fn sweep_rows(cfg: &RunConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let m = cfg.projections()?[0];
    let delta = cfg.system_params()?.delta_hz();
    grid.iter()
        .map(|&value| {
            let mut c = cfg.clone();
            match param {
                SweepParam::Theta2 => c.sequence.theta2_deg = value,
                SweepParam::Sigma => {
                    let mut e = c.ensemble.take().unwrap_or(EnsembleConfig {
                        sigma_rad: 0.0,
                        nodes: eseem_core::ensemble::DEFAULT_QUADRATURE_NODES,
                        shared_b1: false,
                    });
                    e.sigma_rad = value;
                    c.ensemble = Some(e);
                }
            }
            c.validate()?;
            let spec = baseline_spectrum(&simulate_one(&c, m)?, Baseline::Exponential, Window::Hann, 8)?;
            let (i1, i2) = (band_max(&spec, delta), band_max(&spec, 2.0 * delta));
            Ok(SweepRow {
                value,
                i_delta: i1,
                i_2delta: i2,
                ratio: i1 / i2,
            })
        })
        .collect()
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let cfg = args.source.load()?;
    if args.steps < 1 || !args.from.is_finite() || !args.to.is_finite() {
        return Err(CliError::Config(
            "sweep needs finite --from/--to and --steps >= 1".into(),
        ));
    }
    let grid = if args.steps == 1 {
        vec![args.from]
    } else {
        eseem_core::echo::linspace(args.from, args.to, args.steps)
    };
    let rows = sweep_rows(&cfg, args.param, &grid)?;
    let name = match args.param {
        SweepParam::Theta2 => "theta2_deg",
        SweepParam::Sigma => "sigma_rad",
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
        return Ok(());
    }
    let mut doc = CsvDocument::new("sweep", &[name, "i_delta", "i_2delta", "ratio"]);
    doc.config_echo(&cfg.to_toml());
    doc.comment("intensities: largest spectral magnitude within 5% of delta and 2 delta (hann, pad 8, exp baseline)");
    doc.rows = rows
        .iter()
        .map(|r| vec![r.value, r.i_delta, r.i_2delta, r.ratio])
        .collect();
    emit(args.output.out.as_deref(), &doc.render())?;
    if let Some(p) = &args.output.svg {
        let x: Vec<f64> = rows.iter().map(|r| r.value).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        emit(
            Some(p),
            &line_plot(&x, &y, "line intensity ratio", name, "I(delta) / I(2 delta)"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Trace CSV with `tau_s` and `v` columns.
    pub input: PathBuf,
    #[arg(long, default_value = "exp-two-cosine", value_parser = parse_model)]
    pub model: DecayModel,
    #[arg(long)]
    pub json: bool,
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let trace = read_trace(&args.input)?;
    let r = fit_decay(&trace, args.model)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("fit serializes"));
        return Ok(());
    }
    println!(
        "model={}",
        serde_json::to_value(r.model)
            .expect("model serializes")
            .as_str()
            .unwrap_or_default()
    );
    println!("v0={}", number(r.v0));
    println!("t2_s={}", number(r.t2_s));
    if let Some(d) = r.delta_hz {
        println!("delta_hz={}", number(d));
    }
    let amps: Vec<String> = r.amplitudes.iter().map(|a| number(*a)).collect();
    println!("amplitudes={}", amps.join(","));
    println!("residual_norm={}", number(r.residual_norm));
    println!("iterations={}", r.iterations);
    println!("converged={}", r.converged);
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Only run checks whose ID starts with one of these prefixes.
    #[arg(long, value_name = "PREFIX")]
    pub filter: Vec<String>,
    #[arg(long)]
    pub json: bool,
    /// Forces the named check to fail.
    #[arg(long, hide = true, value_name = "ID")]
    pub inject_breach: Option<String>,
}

fn table(report: &ValidationReport) -> String {
    let mut s = format!(
        "{:<12} {:<6} {:>12} {:>12} {:>9}  {}\n",
        "ID", "RESULT", "VALUE", "TOLERANCE", "TIME_MS", "DESCRIPTION"
    );
    for o in &report.outcomes {
        s += &format!(
            "{:<12} {:<6} {:>12.3e} {:>12.3e} {:>9.1}  {}\n",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.value,
            o.tolerance,
            o.elapsed_ms,
            o.description
        );
    }
    let failed = report.failed_ids();
    s += &format!(
        "{} checks: {} passed, {} failed in {:.2} s\n",
        report.outcomes.len(),
        report.outcomes.len() - failed.len(),
        failed.len(),
        report.elapsed_ms / 1e3
    );
    s
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let ids: Vec<&str> = registry().iter().map(|c| c.id).collect();
    if let Some(b) = &args.inject_breach {
        if !ids.contains(&b.as_str()) {
            return Err(CliError::Config(format!("unknown check `{b}`")));
        }
    }
    if !args.filter.is_empty()
        && !ids
            .iter()
            .any(|id| args.filter.iter().any(|f| id.starts_with(f.as_str())))
    {
        return Err(CliError::Config("--filter matches no check".into()));
    }
    let report = run_checks(&args.filter, args.inject_breach.as_deref());
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", table(&report));
    }
    let failed = report.failed_ids();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(
            failed.iter().map(|s| s.to_string()).collect(),
        ))
    }
}
