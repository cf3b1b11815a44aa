use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qrf_lab::validate_config;
use serde_json::Value;

fn run(args: &[&str], out: &Path, config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrf-lab"));
    cmd.args(args).arg("--out").arg(out).env_remove("QRF_LAB_THREADS");
    if let Some(text) = config {
        let p = out.with_extension("cfg");
        fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

fn csv(path: &Path) -> (String, Vec<[f64; 4]>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fig3_d_writes_normalized_marginals_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = run(&["fig3", "--case", "d"], &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("fig3-d.json"));
    for key in ["scenario", "verdicts", "metrics", "files", "config_echo"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["scenario"], "fig3-d");
    let files = report["files"].as_array().unwrap();
    assert_eq!(files.len(), 4);
    for f in files {
        let (header, rows) = csv(&out.join(f["path"].as_str().unwrap()));
        assert_eq!(header, "coordinate,re,im,abs2");
        let dx = rows[1][0] - rows[0][0];
        let total: f64 = rows.iter().map(|r| r[3]).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-8, "{}: {total}", f["path"]);
    }
    // Seen from A, B peaks at the configured offset.
    let (_, rows) = csv(&out.join("fig3-d_A_B.csv"));
    let peak = rows.iter().max_by(|a, b| a[3].total_cmp(&b[3])).unwrap()[0];
    assert!((peak - 2.0).abs() < 1e-9, "{peak}");
    let x = report["metrics"]["X"]["value"].as_f64().unwrap();
    assert_eq!(x, 2.0);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let text = "[grid]\nn = 128\nB.dx = 0.2\n[state]\nL = 2.5\n";
    let o = run(&["fig3", "--case", "c", "--seed", "7"], &out, Some(text));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = json(&out.join("fig3-c.json"))["config_echo"].as_str().unwrap().to_string();
    let cfg = validate_config(&echo).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.grid.n, 128);
    assert_eq!(cfg.grid_spec("B").dx, 0.2);
    assert_eq!(cfg.state.l, 2.5);
    assert_eq!(cfg.scenario.as_deref(), Some("fig3-c"));
    assert_eq!(cfg.to_text(), echo);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for scenario in [&["measurement-invariance"][..], &["boost-superposition"]] {
        let one = dir.path().join(format!("{}-1", scenario[0]));
        let many = dir.path().join(format!("{}-4", scenario[0]));
        let mut a = scenario.to_vec();
        a.extend(["--threads", "1"]);
        assert_eq!(run(&a, &one, None).status.code(), Some(0));
        let o = Command::new(env!("CARGO_BIN_EXE_qrf-lab"))
            .args(scenario)
            .arg("--out")
            .arg(&many)
            .env("QRF_LAB_THREADS", "4")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        let mut names: Vec<_> = fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(fs::read(one.join(&n)).unwrap(), fs::read(many.join(&n)).unwrap(), "{n:?}");
        }
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fig3", "--case", "a"], &dir.path().join("odd"), Some("grid.A.n = 15\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n must be even"));
    let o = run(&["fig3", "--case", "a"], &dir.path().join("key"), Some("\n[masses]\nmZ = 1\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(run(&["warp-drive"], &dir.path().join("s"), None).status.code(), Some(2));
    assert_eq!(run(&["fig3", "--case", "q"], &dir.path().join("q"), None).status.code(), Some(2));
}

#[test]
fn tolerance_failure_exits_with_three_and_keeps_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    // Both branches snap to one grid point, so nothing gets entangled.
    let o = run(&["fig3", "--case", "b"], &out, Some("state.separation = 0.01\n"));
    assert_eq!(o.status.code(), Some(3));
    let report = json(&out.join("fig3-b.json"));
    assert_eq!(report["verdicts"]["entropy_out"]["pass"], false);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL entropy_out"));
}

#[test]
fn heavy_lab_doppler_run_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = run(&["doppler"], &out, Some("masses.mA = 1.0\nmasses.mC = 1000.0\n"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(&out.join("doppler.json"));
    for (name, m) in report["metrics"].as_object().unwrap() {
        assert!(m["value"].as_f64().is_some_and(f64::is_finite), "{name}");
    }
}
