use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eseem_core::{run_two_pulse_echo, EchoExperiment, Projection, PulseSpec, SpinQuantumNumber, SpinSystemParams};
use serde_json::Value;
use tempfile::TempDir;

const DELTA: f64 = 25_815.93;

fn eseem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eseem"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate_preset(dir: &TempDir, preset: &str, file: &str) -> PathBuf {
    ok(&eseem(&["simulate", "--preset", preset, "--out", file], dir.path()));
    dir.path().join(file)
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(text: &str, k: usize) -> Vec<f64> {
    data_rows(text).iter().map(|r| r[k].parse().unwrap()).collect()
}

fn header_line<'a>(text: &'a str, prefix: &str) -> &'a str {
    text.lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` in header"))
}

fn peaks(dir: &TempDir, file: &str) -> Vec<f64> {
    let json: Value = serde_json::from_str(&ok(&eseem(&["spectrum", file, "--json"], dir.path()))).unwrap();
    json["peaks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["freq_hz"].as_f64().unwrap())
        .collect()
}

#[test]
fn missing_tau_block_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("bad.cfg"),
        "[system]\ns = 1.5\ni = 1.0\na_hz = 15.8e6\nf_e_hz = 9.67e9\nf_i_hz = 1.06e6\ng = 2.0036\nresonance_offset_hz = 0.0\n",
    )
    .unwrap();
    let out = eseem(&["simulate", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("tau"), "{}", stderr(&out));
}

#[test]
fn invalid_field_reports_its_path() {
    let dir = TempDir::new().unwrap();
    let text = eseem_preset_text("theta2_120").replace("points = 512", "points = 1");
    std::fs::write(dir.path().join("bad.cfg"), text).unwrap();
    let out = eseem(&["simulate", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("tau.points"));
}

fn eseem_preset_text(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("presets")
            .join(format!("{name}.cfg")),
    )
    .unwrap()
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read_to_string(simulate_preset(&dir, "nc60", "a.csv")).unwrap();
    let b = std::fs::read_to_string(simulate_preset(&dir, "nc60", "b.csv")).unwrap();
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# generated: "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.lines().filter(|l| l.starts_with("# generated: ")).count(), 1);
}

#[test]
fn written_values_round_trip_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(simulate_preset(&dir, "theta2_120", "t.csv")).unwrap();
    let system = SpinSystemParams {
        s: SpinQuantumNumber::THREE_HALVES,
        i: SpinQuantumNumber::ONE,
        a_hz: 15.8e6,
        f_e_hz: 9.67e9,
        f_i_hz: 1.0613e6,
        g: 2.0036,
        f_mw_hz: 9.67e9,
    };
    let tau = eseem_core::echo::linspace(0.0, 400e-6, 512);
    let exp = EchoExperiment::new(
        system,
        PulseSpec::ideal(90f64.to_radians(), 0.0),
        PulseSpec::ideal(120f64.to_radians(), 0.0),
        tau,
        Projection::integer(1),
    );
    let reference = run_two_pulse_echo(&exp).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 512);
    for (k, row) in rows.iter().enumerate() {
        let (t, v): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert_eq!(t.to_bits(), reference.tau_s[k].to_bits());
        assert_eq!(v.to_bits(), reference.v[k].to_bits(), "row {k}");
        assert_eq!(format!("{v:.16e}"), row[1]);
    }
}

#[test]
fn spectrum_reads_simulated_trace() {
    let dir = TempDir::new().unwrap();
    simulate_preset(&dir, "nc60", "a.csv");
    ok(&eseem(
        &["spectrum", "a.csv", "--out", "s.csv", "--svg", "s.svg"],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(text.lines().any(|l| l == "freq_hz,magnitude"));
    assert_eq!(data_rows(&text).len(), 512 * 4 / 2 + 1);
    assert!(header_line(&text, "# peaks: ").starts_with("# peaks: 2"));
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("frequency (kHz)"));
}

#[test]
fn nc60_preset_shows_both_lines() {
    let dir = TempDir::new().unwrap();
    simulate_preset(&dir, "nc60", "a.csv");
    let p = peaks(&dir, "a.csv");
    assert_eq!(p.len(), 2, "{p:?}");
    assert!((p[0] / DELTA - 1.0).abs() < 0.01, "{p:?}");
    assert!((p[1] / (2.0 * DELTA) - 1.0).abs() < 0.01, "{p:?}");
}

#[test]
fn composite_preset_leaves_one_line() {
    let dir = TempDir::new().unwrap();
    simulate_preset(&dir, "nc60_composite", "c.csv");
    let p = peaks(&dir, "c.csv");
    assert_eq!(p.len(), 1, "{p:?}");
    assert!((p[0] / (2.0 * DELTA) - 1.0).abs() < 0.01, "{p:?}");
}

#[test]
fn central_line_decays_monotonically_and_outer_line_oscillates() {
    let dir = TempDir::new().unwrap();
    let center = column(
        &std::fs::read_to_string(simulate_preset(&dir, "nc60_mi_0", "z.csv")).unwrap(),
        1,
    );
    assert!(center.windows(2).all(|w| w[1] < w[0]));
    assert!(peaks(&dir, "z.csv").is_empty());
    let outer = column(
        &std::fs::read_to_string(simulate_preset(&dir, "nc60", "a.csv")).unwrap(),
        1,
    );
    assert!(outer.windows(2).any(|w| w[1] > w[0]));
    assert!(outer.last().unwrap().abs() < outer[0].abs());
}

#[test]
fn constant_trace_has_no_peaks() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("tau_s,v\n");
    for k in 0..128 {
        text += &format!("{:.16e},2.0\n", k as f64 * 1e-6);
    }
    std::fs::write(dir.path().join("flat.csv"), text).unwrap();
    assert!(peaks(&dir, "flat.csv").is_empty());
    let out = eseem(&["spectrum", "flat.csv", "--baseline", "mean", "--json"], dir.path());
    let json: Value = serde_json::from_str(&ok(&out)).unwrap();
    assert!(json["peaks"].as_array().unwrap().is_empty());
}

#[test]
fn analytic_coefficient_headers() {
    let dir = TempDir::new().unwrap();
    let text = ok(&eseem(&["analytic", "--preset", "theta2_120"], dir.path()));
    assert_eq!(
        header_line(&text, "# coefficients"),
        "# coefficients: a0=0.34375 a1=1.875 a2=0.28125"
    );

    let base = eseem_preset_text("theta2_120");
    std::fs::write(
        dir.path().join("pi.cfg"),
        base.replace("theta2_deg = 120.0", "theta2_deg = 180.0"),
    )
    .unwrap();
    let text = ok(&eseem(&["analytic", "--config", "pi.cfg"], dir.path()));
    assert_eq!(header_line(&text, "# coefficients"), "# coefficients: a0=1 a1=0 a2=1.5");

    std::fs::write(dir.path().join("s52.cfg"), base.replace("s = 1.5", "s = 2.5")).unwrap();
    let text = ok(&eseem(
        &["analytic", "--config", "s52.cfg", "--mode", "general"],
        dir.path(),
    ));
    assert_eq!(header_line(&text, "# coefficients"), "# coefficients: 5,8,9,8,5,0");
    let out = eseem(&["analytic", "--config", "s52.cfg", "--mode", "outer"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_outer_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let text = ok(&eseem(&["analytic", "--preset", "theta2_120"], dir.path()));
    let tau = column(&text, 0);
    let v = column(&text, 1);
    for (t, v) in tau.iter().zip(&v) {
        let expect = eseem_core::analytic::v_outer(
            *t,
            std::f64::consts::FRAC_PI_2,
            120f64.to_radians(),
            15.8e6 * 15.8e6 / 9.67e9,
        );
        assert!((v - expect).abs() < 1e-12, "{t}");
    }
}

#[test]
fn several_projections_get_suffixed_files() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "detect_m_i = [-1, 0, 1]\n{}",
        eseem_preset_text("theta2_120").replace("detect_m_i = 1\n", "")
    );
    std::fs::write(dir.path().join("all.cfg"), text).unwrap();
    ok(&eseem(
        &["simulate", "--config", "all.cfg", "--out", "tr.csv", "--svg", "tr.svg"],
        dir.path(),
    ));
    for m in ["-1", "0", "1"] {
        assert!(dir.path().join(format!("tr_mi{m}.csv")).exists());
        assert!(dir.path().join(format!("tr_mi{m}.svg")).exists());
    }
}

#[test]
fn fit_recovers_preset_parameters() {
    let dir = TempDir::new().unwrap();
    simulate_preset(&dir, "nc60", "a.csv");
    let json: Value = serde_json::from_str(&ok(&eseem(&["fit", "a.csv", "--json"], dir.path()))).unwrap();
    assert!(
        (json["delta_hz"].as_f64().unwrap() / DELTA - 1.0).abs() < 0.01,
        "{json}"
    );
    assert!((json["t2_s"].as_f64().unwrap() / 210e-6 - 1.0).abs() < 0.01, "{json}");
    simulate_preset(&dir, "nc60_mi_0", "z.csv");
    let text = ok(&eseem(&["fit", "z.csv", "--model", "exp"], dir.path()));
    let t2: f64 = header_line(&text, "t2_s=").trim_start_matches("t2_s=").parse().unwrap();
    assert!((t2 / 210e-6 - 1.0).abs() < 1e-6);
}

#[test]
fn sweep_over_spread_raises_delta_line() {
    let dir = TempDir::new().unwrap();
    let out = eseem(
        &[
            "sweep", "--preset", "nc60", "--param", "sigma", "--from", "0", "--to", "0.4", "--steps", "3", "--json",
        ],
        dir.path(),
    );
    let rows: Value = serde_json::from_str(&ok(&out)).unwrap();
    let ratios: Vec<f64> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ratio"].as_f64().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    let text = ok(&eseem(
        &[
            "sweep",
            "--preset",
            "theta2_120",
            "--param",
            "theta2",
            "--from",
            "90",
            "--to",
            "180",
            "--steps",
            "4",
        ],
        dir.path(),
    ));
    assert!(text.lines().any(|l| l == "theta2_deg,i_delta,i_2delta,ratio"));
    assert_eq!(data_rows(&text).len(), 4);
}

#[test]
fn validate_passes_with_table() {
    let dir = TempDir::new().unwrap();
    let text = ok(&eseem(&["validate"], dir.path()));
    assert!(text.starts_with("ID"));
    let summary = text.lines().last().unwrap();
    assert!(summary.contains("passed, 0 failed"), "{summary}");
}

#[test]
fn validate_json_is_machine_readable() {
    let dir = TempDir::new().unwrap();
    let json: Value =
        serde_json::from_str(&ok(&eseem(&["validate", "--json", "--filter", "SA-"], dir.path()))).unwrap();
    assert_eq!(json["passed"], Value::Bool(true));
    let outcomes = json["outcomes"].as_array().unwrap();
    assert!(!outcomes.is_empty());
    assert!(outcomes.iter().all(|o| o["id"].as_str().unwrap().starts_with("SA-")));
}

#[test]
fn injected_breach_fails_with_id() {
    let dir = TempDir::new().unwrap();
    let out = eseem(
        &["validate", "--filter", "HAM", "--inject-breach", "HAM-DELTA"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("HAM-DELTA"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let out = eseem(&["validate", "--inject-breach", "NOPE"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
