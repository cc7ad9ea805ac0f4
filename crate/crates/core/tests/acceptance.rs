//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use eseem_core::analytic::{coefficients, v_center, v_general, v_outer};
use eseem_core::echo::linspace;
use eseem_core::ensemble::{average_trace, i1_i2_ratio, AngleDistribution, EnsembleOptions, TraceSource};
use eseem_core::hamiltonian::{epr_stick_spectrum, stick_group};
use eseem_core::spectral::{fft_magnitude, find_peaks, Spectrum, Window};
use eseem_core::validation::run_checks;
use eseem_core::{
    fit_decay, run_two_pulse_echo, DecayModel, EchoExperiment, EchoTrace, Engine, Projection, PulseSpec,
    SpinQuantumNumber, SpinSystemParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn mi(m: i32) -> Projection {
    Projection::integer(m)
}

fn nc60() -> SpinSystemParams {
    SpinSystemParams::nc60()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// Spectrum magnitude linearly interpolated at `freq_hz`.
fn magnitude_at(s: &Spectrum, freq_hz: f64) -> f64 {
    let x = freq_hz / s.resolution_hz();
    let k = x.floor() as usize;
    let t = x - k as f64;
    s.magnitude[k] * (1.0 - t) + s.magnitude[k + 1] * t
}

fn c1_delta() -> Outcome {
    let d = nc60().delta_hz();
    let exact = 15.8e6_f64 * 15.8e6 / 9.67e9;
    let rounded = (d / 10.0).round() * 10.0;
    ensure(
        (d - exact).abs() <= 1.0 && rounded == 25_820.0,
        format!("delta = {d:.3} Hz (a^2/f_e = {exact:.3} Hz), {:.2} kHz", d / 1e3),
    )
}

fn c2_echo_law() -> Outcome {
    let sys = nc60();
    let tau = linspace(0.0, 200e-6, 512);
    let d = 2.0 * PI * sys.delta_hz();
    let expected: Vec<f64> = tau.iter().map(|t| 2.0 + 3.0 * (2.0 * d * t).cos()).collect();
    let mut worst = 0.0_f64;
    for m in [1, -1] {
        let tr = run_two_pulse_echo(&EchoExperiment::hahn(sys, tau.clone(), mi(m))).map_err(err)?;
        worst = worst.max(max_abs_diff(&tr.v, &expected));
    }
    let center = run_two_pulse_echo(&EchoExperiment::hahn(sys, tau, mi(0))).map_err(err)?;
    let level = center.v[0];
    let nominal = v_center(PI / 2.0, PI);
    let level_ratio = level / nominal;
    ensure(
        worst <= 1e-8 && center.variation() <= 1e-9 && (level_ratio - coefficients(PI).sum()).abs() <= 1e-9,
        format!(
            "outer max dev {worst:.2e}; M_I=0 flat (variation {:.2e}) at {level:.6} = {level_ratio:.6} x nominal {nominal}",
            center.variation()
        ),
    )
}

fn c3_exact_peaks() -> Outcome {
    let sys = nc60();
    let d = sys.delta_hz();
    let tau = linspace(0.0, 200e-6, 512);
    let mut exp = EchoExperiment::hahn(sys, tau, mi(1)).with_engine(Engine::ExactLabFrame);
    exp.pulse2 = PulseSpec::ideal(2.0 * PI / 3.0, 0.0);
    let tr = run_two_pulse_echo(&exp).map_err(err)?;
    let s = fft_magnitude(&tr, Window::Hann, 16).map_err(err)?;
    let peaks = find_peaks(&s, 0.05);
    let p1 = peaks.nearest(d).ok_or("no peaks")?.freq_hz;
    let p2 = peaks.nearest(2.0 * d).ok_or("no peaks")?.freq_hz;
    let (e1, e2) = ((p1 - d).abs() / d, (p2 - 2.0 * d).abs() / (2.0 * d));
    ensure(
        e1 <= 0.01 && e2 <= 0.01,
        format!(
            "theta2=120deg: peaks {p1:.1} Hz ({:.3}%), {p2:.1} Hz ({:.3}%)",
            100.0 * e1,
            100.0 * e2
        ),
    )
}

fn c4_angle_ratio() -> Outcome {
    let sys = nc60();
    let d = sys.delta_hz();
    let tau = linspace(0.0, 1e-3, 1024);
    let mut exp = EchoExperiment::hahn(sys, tau, mi(1));
    exp.pulse2 = PulseSpec::ideal(2.0 * PI / 3.0, 0.0);
    let tr = run_two_pulse_echo(&exp).map_err(err)?;
    let s = fft_magnitude(&tr, Window::Hann, 4).map_err(err)?;
    let peaks = find_peaks(&s, 0.05);
    let (p1, p2) = (
        peaks.nearest(d).ok_or("no peaks")?,
        peaks.nearest(2.0 * d).ok_or("no peaks")?,
    );
    let ratio = p1.magnitude / p2.magnitude;
    let k = coefficients(2.0 * PI / 3.0);
    let target = k.a1 / k.a2;
    ensure(
        (ratio / target - 1.0).abs() <= 0.05,
        format!("delta/2delta peak ratio {ratio:.3} vs A1/A2 = {target:.3}"),
    )
}

fn c5_b1_ratio() -> Outcome {
    let r = i1_i2_ratio(&AngleDistribution::gaussian(PI, 0.31)).map_err(err)?;
    // the same ratio read from the spectrum of the averaged simulation
    let sys = nc60();
    let d = sys.delta_hz();
    let exp = EchoExperiment::hahn(sys, linspace(0.0, 1e-3, 512), mi(1));
    let avg = average_trace(
        &TraceSource::Numeric(exp),
        &AngleDistribution::gaussian(PI, 0.31),
        EnsembleOptions::default(),
    )
    .map_err(err)?;
    let s = fft_magnitude(&avg, Window::Hann, 4).map_err(err)?;
    let peaks = find_peaks(&s, 0.05);
    let spectral = peaks.nearest(d).ok_or("no peaks")?.magnitude / peaks.nearest(2.0 * d).ok_or("no peaks")?.magnitude;
    ensure(
        (r - 0.17).abs() <= 0.03 && (spectral - 0.17).abs() <= 0.03,
        format!("I1/I2 = {r:.4} (quadrature), {spectral:.4} (spectrum)"),
    )
}

fn c6_composite() -> Outcome {
    let sys = nc60();
    let d = sys.delta_hz();
    let tau = linspace(0.0, 400e-6, 256);
    let dist = AngleDistribution::gaussian(PI, 0.31);
    let plain = EchoExperiment::hahn(sys, tau.clone(), mi(1));
    let mut composite = plain.clone();
    composite.pulse2 = PulseSpec::composite_pi();
    let spec = |exp: EchoExperiment| -> Result<Spectrum, String> {
        let tr = average_trace(&TraceSource::Numeric(exp), &dist, EnsembleOptions::default()).map_err(err)?;
        fft_magnitude(&tr, Window::Hann, 8).map_err(err)
    };
    let (sp, sc) = (spec(plain)?, spec(composite)?);
    let (mp, mc) = (magnitude_at(&sp, d), magnitude_at(&sc, d));
    let suppression = mp / mc;
    let composite_peaks = find_peaks(&sc, 0.05);
    ensure(
        suppression >= 5.0,
        format!(
            "delta-peak suppression {suppression:.1}x; composite spectrum peaks at {:?} Hz",
            composite_peaks
                .peaks
                .iter()
                .map(|p| p.freq_hz.round())
                .collect::<Vec<_>>()
        ),
    )
}

fn c7_general_s() -> Outcome {
    let tau = linspace(0.0, 200e-6, 256);
    let mut worst = 0.0_f64;
    let mut consts = Vec::new();
    let mut half_variation = f64::INFINITY;
    for twice in 1..=5 {
        let mut sys = nc60();
        sys.s = SpinQuantumNumber::from_twice(twice);
        let num = run_two_pulse_echo(&EchoExperiment::hahn(sys, tau.clone(), mi(1))).map_err(err)?;
        let ana: Vec<f64> = tau
            .iter()
            .map(|t| v_general(sys.s, mi(1), *t, sys.delta_hz()).re)
            .collect();
        let c = ana.iter().zip(&num.v).map(|(a, n)| a * n).sum::<f64>() / num.v.iter().map(|n| n * n).sum::<f64>();
        let scaled: Vec<f64> = num.v.iter().map(|n| c * n).collect();
        worst = worst.max(max_abs_diff(&ana, &scaled));
        consts.push(format!("{c:.9}"));
        if twice == 1 {
            half_variation = num.variation();
        }
    }
    ensure(
        worst <= 1e-8 && half_variation <= 1e-9,
        format!(
            "residual {worst:.2e}; constants [{}]; S=1/2 variation {half_variation:.1e}",
            consts.join(", ")
        ),
    )
}

fn c8_sticks() -> Outcome {
    let sys = nc60();
    let lines = epr_stick_spectrum(&sys).map_err(err)?;
    let mut intensity_dev = 0.0_f64;
    for m in [-1, 0, 1] {
        let w: Vec<f64> = stick_group(&lines, mi(m)).iter().map(|l| l.intensity).collect();
        intensity_dev = intensity_dev.max(max_abs_diff(&w, &[3.0, 4.0, 3.0]));
    }
    let g = stick_group(&lines, mi(1));
    let split = (g[2].offset_hz - g[0].offset_hz).abs() / 2.0;
    let ut = sys.hz_to_tesla(split) * 1e6;
    let rel = (split / sys.delta_hz() - 1.0).abs();
    ensure(
        intensity_dev == 0.0 && rel <= 5e-3 && (ut - 0.9).abs() <= 0.05,
        format!(
            "3:4:3 exact; splitting {split:.1} Hz ({:.3}% from delta) = {ut:.3} uT",
            100.0 * rel
        ),
    )
}

fn c9_property_suites() -> Outcome {
    let start = Instant::now();
    let report = run_checks(&[], None);
    let secs = start.elapsed().as_secs_f64();
    ensure(
        report.passed && secs < 30.0,
        format!(
            "{} checks, failed {:?}, {secs:.2} s",
            report.outcomes.len(),
            report.failed_ids()
        ),
    )
}

fn c10_fit() -> Outcome {
    let d = nc60().delta_hz();
    let t2 = 210e-6;
    let tau = linspace(0.0, 400e-6, 512);
    let clean: Vec<f64> = tau
        .iter()
        .map(|t| v_outer(*t, PI / 2.0, PI, d) * (-2.0 * t / t2).exp())
        .collect();
    let rel = |f: &eseem_core::FitResult| {
        let dd = (f.delta_hz.unwrap_or(f64::NAN) / d - 1.0).abs();
        let dt = (f.t2_s / t2 - 1.0).abs();
        (dd, dt)
    };
    let f = fit_decay(&EchoTrace::new(tau.clone(), clean.clone()), DecayModel::ExpTwoCosine).map_err(err)?;
    let (d0, t0) = rel(&f);
    let amplitude = clean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let noise = Normal::new(0.0, 0.01 * amplitude).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20240);
    let noisy: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let g = fit_decay(&EchoTrace::new(tau, noisy), DecayModel::ExpTwoCosine).map_err(err)?;
    let (d1, t1) = rel(&g);
    ensure(
        d0 <= 1e-3 && t0 <= 1e-3 && d1 <= 0.02 && t1 <= 0.02,
        format!("noiseless delta {d0:.1e} T2 {t0:.1e}; 1% noise delta {d1:.1e} T2 {t1:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("C1 delta", c1_delta),
        ("C2 ideal echo law", c2_echo_law),
        ("C3 exact-engine frequencies", c3_exact_peaks),
        ("C4 pulse-angle ratio", c4_angle_ratio),
        ("C5 B1 ratio", c5_b1_ratio),
        ("C6 composite suppression", c6_composite),
        ("C7 general-S law", c7_general_s),
        ("C8 stick spectrum", c8_sticks),
        ("C9 property suites", c9_property_suites),
        ("C10 fit recovery", c10_fit),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{secs:.2} s]"),
            Err(d) => {
                failures += 1;
                println!("FAIL {name}: {d} [{secs:.2} s]");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
