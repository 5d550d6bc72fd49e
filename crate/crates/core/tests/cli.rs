use std::fs;
use std::path::Path;
use std::process::Command;

use polariton::config::{parse_config, Experiment};
use polariton::io::read_table;
use polariton::run::{run_command, RunOptions, EXIT_NUMERICAL, EXIT_VALIDATION};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_polariton");

const MODEL: &str = "
[model]
kappa = 10.0
gamma_x = 2.0
r_scatter = 0.02
p_l = 1080.0
p_r = 1020.0
eta = 0.3
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn polariton(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn steady_document_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MODEL);
    let out = tmp.path().join("steady");
    let status = polariton(&["steady", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let doc = json(&out.join("steady.json"));
    let close = |key: &str, want: f64, tol: f64| {
        let got = doc[key].as_f64().unwrap();
        assert!((got - want).abs() < tol, "{key}: {got} vs {want}");
    };
    close("pop", 5.0, 1e-9);
    close("n_l", 514.2857, 1e-4);
    close("n_r", 485.7143, 1e-4);
    close("im_theta", -0.714286, 1e-6);
    close("re_theta", 4.94872, 1e-5);
    assert_eq!(doc["units"]["pop"], "|psi|^2");
    for f in ["config.toml", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn spectrum_table_follows_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MODEL}[spectrum]\ngamma_min = 0.0\ngamma_max = 2.0\nsteps = 201\n"));
    let out = tmp.path().join("spectrum");
    let status = polariton(&["spectrum", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(status.status.success());
    let (header, rows) = read_table(&fs::read_to_string(out.join("spectrum.tsv")).unwrap()).unwrap();
    assert_eq!(header[0], "gamma");
    assert_eq!(header[2], "im_lambda_plus");
    assert_eq!(rows.len(), 201);
    for r in &rows {
        let gamma = r[0];
        let want = if gamma <= 1.0 { 0.0 } else { (gamma * gamma - 1.0).sqrt() };
        assert!((r[2] - want).abs() < 1e-12, "gamma {gamma}: {}", r[2]);
    }
}

#[test]
fn below_threshold_simulation_decays() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MODEL
        .replace("p_l = 1080.0", "p_l = 1000.0")
        .replace("p_r = 1020.0", "p_r = 990.0")
        .replace("eta = 0.3", "eta = 0.0");
    let cfg = write_config(tmp.path(), &format!("{text}[integration]\nt_end = 600.0\nrecord_stride = 1000\n"));
    let out = tmp.path().join("sim");
    let status = polariton(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(status.status.success());
    let (header, rows) = read_table(&fs::read_to_string(out.join("trajectory.tsv")).unwrap()).unwrap();
    assert_eq!(
        header,
        ["t", "re_psi_l", "im_psi_l", "re_psi_r", "im_psi_r", "n_l", "n_r", "pop_l", "pop_r", "re_theta", "im_theta"]
    );
    let seed = rows[0][7] + rows[0][8];
    let last = rows.last().unwrap();
    assert_eq!(last[0], 600.0);
    assert!(last[7] + last[8] < 1e-6 * seed, "final population {}", last[7] + last[8]);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{MODEL}[integration]\nt_end = 5.0\nrecord_stride = 10\n[noise]\nxi = 0.05\nnoise_dt = 0.01\n[ensemble]\nn_realizations = 4\nbase_seed = 11\n[correlation]\nt0 = 1.0\nmax_lag = 3.0\n"),
    );
    let cfg = cfg.to_str().unwrap();
    let dirs: Vec<_> = ["a", "b"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, workers) in dirs.iter().zip(["1", "3"]) {
        for cmd in ["simulate", "ensemble"] {
            let out = dir.join(cmd);
            let s = polariton(&[cmd, "--config", cfg, "--out-dir", out.to_str().unwrap(), "--workers", workers]);
            assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
        }
    }
    for (cmd, files) in [
        ("simulate", &["trajectory.tsv", "summary.json"][..]),
        ("ensemble", &["ensemble_means.tsv", "g1_ensemble.tsv", "summary.json"][..]),
    ] {
        for f in files {
            let a = fs::read(dirs[0].join(cmd).join(f)).unwrap();
            let b = fs::read(dirs[1].join(cmd).join(f)).unwrap();
            assert!(a == b, "{cmd}/{f} differs");
        }
    }
    // the echoes differ only in out_dir
    let echo = |d: &Path| {
        let mut c = parse_config(&fs::read_to_string(d.join("simulate/config.toml")).unwrap()).unwrap();
        c.out_dir = Default::default();
        c
    };
    assert_eq!(echo(&dirs[0]), echo(&dirs[1]));
    // a different seed changes the noisy trajectory
    let out = tmp.path().join("c");
    assert!(polariton(&["simulate", "--config", cfg, "--out-dir", out.to_str().unwrap(), "--seed", "12"]).status.success());
    assert_ne!(
        fs::read(out.join("trajectory.tsv")).unwrap(),
        fs::read(dirs[0].join("simulate/trajectory.tsv")).unwrap()
    );
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["base_seed"], 12);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn effective_config_echo_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(MODEL).unwrap();
    cfg.out_dir = tmp.path().join("echo");
    run_command(&cfg, Experiment::Steady, RunOptions::default()).unwrap();
    let echoed = parse_config(&fs::read_to_string(cfg.out_dir.join("config.toml")).unwrap()).unwrap();
    let mut want = cfg.clone();
    want.experiment = Some(Experiment::Steady);
    assert_eq!(echoed, want);
}

#[test]
fn validation_errors_exit_one_with_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &MODEL.replace("kappa = 10.0", "kappa = -1.0"));
    let out = tmp.path().join("bad");
    let s = polariton(&["steady", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(s.status.code(), Some(EXIT_VALIDATION));
    let rec = json(&out.join("error.json"));
    assert_eq!(rec["kind"], "validation");
    assert_eq!(rec["key"], "kappa");

    let cfg = write_config(tmp.path(), &format!("{MODEL}typo = 1\n"));
    let s = polariton(&["steady", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(s.status.code(), Some(EXIT_VALIDATION));
    assert_eq!(json(&out.join("error.json"))["key"], "typo");
}

#[test]
fn divergence_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MODEL}[integration]\nt_end = 50.0\ndivergence_bound = 1.0\n"));
    let out = tmp.path().join("div");
    let s = polariton(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(s.status.code(), Some(EXIT_NUMERICAL));
    let rec = json(&out.join("error.json"));
    assert_eq!(rec["kind"], "numerical");
    assert!(!out.join("trajectory.tsv").exists());
}

#[test]
fn steady_without_solution_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // imbalance beyond 2JS/κ leaves no real coherence
    let cfg = write_config(tmp.path(), &MODEL.replace("p_l = 1080.0", "p_l = 1500.0").replace("p_r = 1020.0", "p_r = 600.0"));
    let out = tmp.path().join("nr");
    let s = polariton(&["steady", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(s.status.code(), Some(EXIT_NUMERICAL));
}

#[test]
fn correlate_and_sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{MODEL}[integration]\nrecord_stride = 100\n[noise]\nxi = 0.05\n[ensemble]\nn_realizations = 8\n\
             [correlation]\nt0 = 5.0\nmax_lag = 4.0\nwindow = 20.0\nestimator = \"both\"\n\
             [sweep]\np_l = {{ min = 900.0, max = 1500.0, steps = 4 }}\np_r = {{ min = 600.0, max = 1100.0, steps = 3 }}\n"
        ),
    );
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("corr");
    let s = polariton(&["correlate", "--config", cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let doc = json(&out.join("correlation.json"));
    assert!(doc["ergodicity_metric"].as_f64().is_some());
    for f in ["g1_ensemble.tsv", "g1_time_averaged.tsv"] {
        let (_, rows) = read_table(&fs::read_to_string(out.join(f)).unwrap()).unwrap();
        assert_eq!(rows.len(), 41);
        assert!((rows[0][3] - 1.0).abs() < 1e-10);
    }
    // t_end was extended to cover the averaging window
    let echoed = parse_config(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert!(echoed.integration.t_end >= 29.0);

    let out = tmp.path().join("sweep");
    let s = polariton(&["sweep", "--config", cfg, "--out-dir", out.to_str().unwrap(), "--workers", "2"]);
    assert!(s.status.success());
    let (_, rows) = read_table(&fs::read_to_string(out.join("sweep.tsv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let above = r[0] + r[1] > 2000.0;
        assert_eq!(r[2] == 1.0, above, "{r:?}");
        if above && r[3].is_finite() {
            assert!((r[4] + r[5] - 1000.0).abs() < 1e-9);
        }
    }
    // (1500, 600) has no real steady coherence
    assert!(rows.iter().any(|r| r[2] == 1.0 && r[3].is_nan()));
}
