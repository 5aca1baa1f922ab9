use ddsim::config::RunConfig;
use ddsim::curve::DecayCurve;
use std::path::Path;
use std::process::{Command, Output};

fn ddsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddsim")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SILENT: &str = r#"
[noise]
sigma_delta_hz = 0.0
tau_c_s = 1.0
sigma_eps = 0.0
tau_omega_s = 1.0

[ensemble]
n_realizations = 1
seed = 3

[[sequence]]
name = "hahn"
kind = "hahn"
tau_s = [1e-6, 2e-6]

[[sequence]]
name = "xy8"
kind = "xy8"
tau_s = 1e-6
n_pulses = { start = 8, stop = 24, step = 8 }
"#;

const NOISY: &str = r#"
[ensemble]
n_realizations = 6
seed = 9

[[sequence]]
name = "cpmg"
kind = "cpmg"
initial_phase_deg = 90
frame_phase_deg = 90
tau_s = 5e-6
n_pulses = [0, 4, 8, 16]
"#;

#[test]
fn silent_simulation_gives_unit_signal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    write(&cfg, SILENT);
    let out = dir.path().join("out");
    let o = ddsim(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["hahn.csv", "xy8.csv"] {
        let c = DecayCurve::read_path(&out.join(name)).unwrap();
        assert!(!c.is_empty());
        for p in &c.points {
            assert!((p.signal - 1.0).abs() < 1e-6, "{name}: {}", p.signal);
        }
    }
    let xy8 = DecayCurve::read_path(&out.join("xy8.csv")).unwrap();
    assert_eq!(xy8.points.iter().map(|p| p.n_pulses.unwrap()).collect::<Vec<_>>(), vec![8, 16, 24]);
}

#[test]
fn reruns_are_byte_identical_and_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    write(&cfg, NOISY);
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let o = ddsim(&[
            "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
            "--seed", "42", "--threads", threads, "simulate",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(
        std::fs::read(a.join("cpmg.csv")).unwrap(),
        std::fs::read(b.join("cpmg.csv")).unwrap()
    );
    let manifest = RunConfig::load(&a.join("run_manifest.toml")).unwrap();
    assert_eq!(manifest.ensemble.seed, 42);
    let mut expected = RunConfig::from_toml(NOISY).unwrap();
    expected.ensemble.seed = 42;
    expected.output_dir = a.clone();
    assert_eq!(manifest, expected);
    // the manifest is itself a runnable config
    let c = dir.path().join("c2");
    let o = ddsim(&["--config", a.join("run_manifest.toml").to_str().unwrap(), "--out", c.to_str().unwrap(), "simulate"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(a.join("cpmg.csv")).unwrap(), std::fs::read(c.join("cpmg.csv")).unwrap());
}

#[test]
fn invalid_config_names_key_and_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    write(&cfg, &NOISY.replace("tau_s = 5e-6", "tau_s = 1e-8"));
    let out = dir.path().join("out");
    let o = ddsim(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cpmg"), "{err}");
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);

    write(&cfg, &NOISY.replace("n_pulses = [0, 4, 8, 16]", "n_pulses = []"));
    let o = ddsim(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_pulses"));
}

#[test]
fn fit_simple_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let mut text = String::from("total_time_s,signal\n");
    for i in 0..30 {
        let t = i as f64 * 2e-3;
        text += &format!("{t:e},{}\n", (-t / 24.1e-3f64).exp());
    }
    write(&csv, &text);
    let out = dir.path().join("out");
    let o = ddsim(&["--out", out.to_str().unwrap(), "fit", "--input", csv.to_str().unwrap(), "--model", "simple"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("fit_summary.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    assert_eq!(&headers[1], "t2_s");
    let row = rd.records().next().unwrap().unwrap();
    let t2: f64 = row[1].parse().unwrap();
    assert!((t2 / 24.1e-3 - 1.0).abs() < 1e-3);

    write(&csv, "total_time_s,signal\n0.0,1.0\n0.001,abc\n");
    let out2 = dir.path().join("out2");
    let o = ddsim(&["--out", out2.to_str().unwrap(), "fit", "--input", csv.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("curve.csv:3:"), "{err}");
}

#[test]
fn fit_tau_c_writes_one_row_per_restart() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let curve = ddsim::estimation::synthetic_order_scan(
        100e-6,
        &(0..=50).map(|k| 8 * k).collect::<Vec<u64>>(),
        2.0 * std::f64::consts::PI * 146e3,
        15.5,
        0.02,
        1,
    );
    curve.write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = ddsim(&["--out", out.to_str().unwrap(), "fit", "--input", csv.to_str().unwrap(), "--model", "ou-tau-c"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(out.join("tau_c_restarts.csv")).unwrap().records().count();
    assert_eq!(rows, 500);
    let mut rd = csv::Reader::from_path(out.join("tau_c_summary.csv")).unwrap();
    let row = rd.records().next().unwrap().unwrap();
    let tc: f64 = row[0].parse().unwrap();
    assert!((tc / 15.5 - 1.0).abs() < 0.15, "{tc}");
    assert!(out.join("tau_c_histogram.csv").exists());
}

#[test]
fn analytic_presets_and_hahn_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ddsim(&["--out", out.to_str().unwrap(), "analytic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("analytic_summary.csv")).unwrap();
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let hahn: f64 = rows[1][2].parse().unwrap();
    assert!((hahn / 605e-6 - 1.0).abs() < 0.01, "{hahn}");
    let mut rd = csv::Reader::from_path(out.join("analytic_cpmg.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["tau_c_s", "N", "tau_s", "total_time_s", "gamma", "coherence"]
    );
    let presets: std::collections::BTreeSet<String> =
        rd.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(presets.len(), 3);
}

#[test]
fn gatemap_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    write(
        &cfg,
        "[gatemap]\ngates = [\"pi\", \"xy8\"]\neps_max = 0.0\ndelta_max_hz = 0.0\nn_eps = 1\nn_delta = 1\ntau_s = 100e-6\n",
    );
    let out = dir.path().join("out");
    let o = ddsim(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "gatemap"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for g in ["pi", "xy8"] {
        let mut rd = csv::Reader::from_path(out.join(format!("gatemap_{g}.csv"))).unwrap();
        let row = rd.records().next().unwrap().unwrap();
        let f: f64 = row[2].parse().unwrap();
        assert!((f - 1.0).abs() < 1e-9);
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("gatemap_{g}.json"))).unwrap()).unwrap();
        assert_eq!(meta["threshold"], 0.9999);
    }
}

#[test]
fn trajectory_dump_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ddsim(&["--out", out.to_str().unwrap(), "trajectory-dump", "--duration", "1e-5", "--dt", "1e-6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["time_s", "delta_rad_s", "eps"]);
    assert_eq!(rd.records().count(), 11);
}
