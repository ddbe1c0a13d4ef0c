use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use qsme_core::linalg::{c, diagonal, pauli_x, pauli_z};
use qsme_core::master::lindblad_euler;
use qsme_core::{Picture, SystemParams};
use serde_json::{json, Value};
use tempfile::TempDir;

fn qsme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsme")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn qubit(engine: &str) -> Value {
    json!({
        "name": "qubit",
        "dim": 2,
        "H": "scaled(pauli_x, 0.5)",
        "Ls": ["pauli_z"],
        "rho0": [[0.7, 0.2], [0.2, 0.3]],
        "T": 0.5,
        "dt": 0.01,
        "trajectories": 100,
        "seed": 42,
        "engine": engine,
        "outputs": [{"observable": "pauli_z", "stride": 5}, {"observable": "pauli_x", "stride": 10}]
    })
}

fn write_scenario(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

fn simulate(file: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", file.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qsme(&args)
}

fn summary(out: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(format!("{name}.summary.json"))).unwrap()).unwrap()
}

#[test]
fn validate_config_reports_violations_with_paths() {
    let dir = TempDir::new().unwrap();
    let ok = write_scenario(dir.path(), "ok.json", &json!({
        "dim": 2, "H": "pauli_z", "Ls": ["pauli_z"], "rho0": {"diag": [0.5, 0.5]},
        "T": 1.0, "dt": 0.01, "trajectories": 10, "engine": "sme_nonlinear"
    }));
    let o = qsme(&["validate-config", ok.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut doc = qubit("sme_nonlinear");
    doc["rho0"] = json!({"diag": [0.5, 0.4]});
    doc["H"] = json!([[0, 1], [0, 0]]);
    let bad = write_scenario(dir.path(), "bad.json", &doc);
    let o = qsme(&["validate-config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("/rho0: rho0 trace != 1"), "{err}");
    assert!(err.contains("/H: H not Hermitian"), "{err}");

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&qsme(&["validate-config", dir.path().join("broken.json").to_str().unwrap()])), 2);
    assert_eq!(code(&qsme(&["validate-config", dir.path().join("missing.json").to_str().unwrap()])), 4);
}

#[test]
fn csv_is_long_format_and_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(dir.path(), "s.json", &qubit("sme_nonlinear"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&simulate(&file, &a, &["--threads", "1"])), 0);
    assert_eq!(code(&simulate(&file, &b, &["--threads", "3"])), 0);
    let csv_a = fs::read(a.join("qubit.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("qubit.csv")).unwrap());
    assert_eq!(summary(&a, "qubit"), summary(&b, "qubit"));

    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,traj_id,observable,value"));
    // 100 paths × (11 + 6 checkpoints) + mean/stderr rows.
    assert_eq!(lines.count(), 100 * 17 + 2 * 17);
    assert!(text.contains("\n0.5,mean,ev_pauli_z,"));
}

#[test]
fn dt_override_doubles_rows_and_changes_hash() {
    let dir = TempDir::new().unwrap();
    let mut doc = qubit("sme_nonlinear");
    doc["outputs"] = json!([{"observable": "pauli_z"}]);
    let file = write_scenario(dir.path(), "s.json", &doc);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&simulate(&file, &a, &[])), 0);
    assert_eq!(code(&simulate(&file, &b, &["--set", "dt=0.005"])), 0);
    let rows = |d: &Path| fs::read_to_string(d.join("qubit.csv")).unwrap().lines().count() - 1;
    let (ra, rb) = (rows(&a), rows(&b));
    // (steps + 1) checkpoints per series: 51 → 101.
    assert_eq!(ra, 102 * 51);
    assert_eq!(rb, 102 * 101);
    assert_ne!(summary(&a, "qubit")["config_hash"], summary(&b, "qubit")["config_hash"]);
}

#[test]
fn mean_rows_match_the_deterministic_solution() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(dir.path(), "s.json", &qubit("sme_nonlinear"));
    assert_eq!(code(&simulate(&file, dir.path(), &[])), 0);
    let s = summary(dir.path(), "qubit");
    let params = SystemParams::new(pauli_x() * c(0.5, 0.0), vec![pauli_z()], 0.01, Picture::Schroedinger).unwrap();
    let rho0 = diagonal(&[0.7, 0.3]) + pauli_x() * c(0.2, 0.0);
    for (name, obs) in [("ev_pauli_z", pauli_z()), ("ev_pauli_x", pauli_x())] {
        let series = &s["results"]["observables"][name];
        let ts = series["t"].as_array().unwrap();
        for (k, t) in ts.iter().enumerate() {
            let t = t.as_f64().unwrap();
            // The Euler mean is exactly the Euler discretization of the ODE.
            let want = (&obs * lindblad_euler(&rho0, &params, t, (t / 0.01).round() as usize)).trace().re;
            let mean = series["mean"][k].as_f64().unwrap();
            let se = series["stderr"][k].as_f64().unwrap();
            assert!((mean - want).abs() <= 3.0 * se + 1e-12, "{name} t={t}: {mean} vs {want} (se {se})");
        }
    }
}

#[test]
fn zero_interaction_meanfield_reproduces_sme_results() {
    let dir = TempDir::new().unwrap();
    let plain = write_scenario(dir.path(), "plain.json", &qubit("sme_nonlinear"));
    let mut doc = qubit("meanfield");
    doc["meanfield"] = json!({"interaction": {"kind": "zero"}});
    let mf = write_scenario(dir.path(), "mf.json", &doc);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&simulate(&plain, &a, &[])), 0);
    let o = simulate(&mf, &b, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(summary(&a, "qubit")["results"], summary(&b, "qubit")["results"]);
    assert_eq!(fs::read(a.join("qubit.csv")).unwrap(), fs::read(b.join("qubit.csv")).unwrap());
}

#[test]
fn every_engine_runs_and_json_format_embeds_series() {
    let dir = TempDir::new().unwrap();
    for engine in ["pure_linear", "pure_nonlinear", "sme_linear", "ensemble"] {
        let mut doc = qubit(engine);
        doc["name"] = json!(engine);
        if engine.starts_with("pure") {
            doc["rho0"] = json!({"pure": [[0.6, 0], [0, 0.8]]});
        }
        let file = write_scenario(dir.path(), &format!("{engine}.json"), &doc);
        let o = simulate(&file, dir.path(), &["--format", "json"]);
        assert_eq!(code(&o), 0, "{engine}: {}", stderr(&o));
        let v: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{engine}.json"))).unwrap()).unwrap();
        assert_eq!(v["engine"], json!(engine));
        assert_eq!(v["series"].as_array().unwrap().len(), 100 * 17 + 2 * 17);
        let z0 = v["results"]["observables"]["ev_pauli_z"]["mean"][0].as_f64().unwrap();
        let want = if engine.starts_with("pure") { 0.36 - 0.64 } else { 0.4 };
        assert!((z0 - want).abs() < 1e-12, "{engine}: {z0}");
    }
    // Pure engines need a rank-one start.
    let file = write_scenario(dir.path(), "mixed.json", &qubit("pure_linear"));
    assert_eq!(code(&qsme(&["validate-config", file.to_str().unwrap()])), 2);
}

#[test]
fn runtime_and_io_failures_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let mut doc = qubit("meanfield");
    doc["meanfield"] = json!({
        "interaction": {"kind": "potential", "table": [[1, -1], [-1, 1]]},
        "picard_max_iter": 1,
        "picard_tol": 1e-12
    });
    let file = write_scenario(dir.path(), "mf.json", &doc);
    let o = simulate(&file, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("\"status\": \"aborted\""));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let ok = write_scenario(dir.path(), "ok.json", &qubit("sme_nonlinear"));
    assert_eq!(code(&simulate(&ok, &blocker.join("sub"), &[])), 4);
}

#[test]
fn check_suites_report_through_exit_codes() {
    let start = Instant::now();
    let o = qsme(&["check", "inequalities"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(start.elapsed().as_secs() < 60);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], json!(true));
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["config_hash"].as_str().unwrap().len() == 64));

    let o = qsme(&["check", "martingale", "--sabotage-martingale"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("trace_martingale"));
    assert_eq!(code(&qsme(&["check", "martingale"])), 0);
    assert_eq!(code(&qsme(&["check", "nonsense"])), 2);
}

#[test]
fn check_all_passes_on_pinned_seeds() {
    let o = qsme(&["check", "all", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("name,pass,observed,bound,margin,seed,config_hash\n"));
    assert!(!table.contains(",false,"));
}
