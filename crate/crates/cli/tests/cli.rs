use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use flowlearn::field::ScalarField;
use flowlearn::geometry::Point2;
use flowlearn::gp::{GaussianField, Kernel, KernelParams, Observation};
use flowlearn::orchestrator::RunConfig;
use flowlearn_cli::Experiment;

const RUN_FILES: [&str; 5] = ["runlog.json", "measurements.csv", "posterior_fields.csv", "model_probs.csv", "waypoints.csv"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowlearn"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn golden_headers() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/headers.txt")).unwrap();
    text.lines().map(|l| l.split_once(": ").map(|(a, b)| (a.to_string(), b.to_string())).unwrap()).collect()
}

#[test]
fn run_writes_five_parseable_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&configs().join("quick.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in RUN_FILES {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("runlog.json")).unwrap()).unwrap();
    assert_eq!(log["version"], 1);
    let steps = log["steps"].as_array().unwrap().len();
    let models = log["model_ids"].as_array().unwrap().len();
    let points = log["posterior"]["points"].as_array().unwrap().len();
    let rows = |f: &str| {
        let mut r = csv::Reader::from_path(out.join(f)).unwrap();
        let width = r.headers().unwrap().len();
        let recs: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert!(recs.iter().all(|x| x.len() == width), "{f}: ragged rows");
        recs.len()
    };
    assert_eq!(rows("measurements.csv"), steps);
    assert_eq!(rows("waypoints.csv"), steps);
    assert_eq!(rows("posterior_fields.csv"), points);
    assert_eq!(rows("model_probs.csv"), models * (steps + 1));
    for (file, h) in golden_headers().iter().filter(|(f, _)| out.join(f).exists()) {
        assert_eq!(&header(&out.join(file)), h, "{file} header changed");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("quick.toml");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&cfg, &a, &["--seed", "5"]).status.success());
    assert!(run(&cfg, &b, &["--seed", "5"]).status.success());
    for f in RUN_FILES {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // deleting the outputs and rerunning reproduces them
    let before = std::fs::read(a.join("waypoints.csv")).unwrap();
    std::fs::remove_dir_all(&a).unwrap();
    assert!(run(&cfg, &a, &["--seed", "5"]).status.success());
    assert_eq!(std::fs::read(a.join("waypoints.csv")).unwrap(), before);
    let c = tmp.path().join("c");
    assert!(run(&cfg, &c, &["--seed", "6"]).status.success());
    assert_ne!(std::fs::read(c.join("measurements.csv")).unwrap(), before);
}

#[test]
fn exploration_above_budget_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "schema_version = 1\n\n[planner]\nmax_measurements = 5\nexploration = 9\n");
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:5: planner.exploration"), "{err}");
    assert!(err.contains("exceeds max_measurements"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_keys_and_bad_versions_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "typo.toml", "schema_version = 1\n[noise]\ngamma_x = 0.02\ngama_beta_deg = 4.0\n");
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("typo.toml:4:"), "{}", stderr(&o));
    let cfg = write(tmp.path(), "v.toml", "schema_version = 7\n");
    assert_eq!(run(&cfg, &tmp.path().join("out"), &[]).status.code(), Some(2));
    let o = run(&tmp.path().join("missing.toml"), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1_with_step_context() {
    let tmp = tempfile::tempdir().unwrap();
    // waypoints 0.2 m apart cannot be reached with 0.01 m of travel, even doubled
    let cfg = write(
        tmp.path(),
        "stuck.toml",
        "schema_version = 1\n[sampling]\nsamples = 60\nbootstrap = 40\n[planner]\nmax_measurements = 12\ncandidate_spacing = 0.2\nmax_travel = 0.01\n[evaluation]\ntest_points = 10\n",
    );
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("step 10 (plan)") && err.contains("isolated robot"), "{err}");
}

#[test]
fn unknown_metric_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["compare", "--metrics", "entropy,random", "--seeds", "1", "--config"])
        .arg(configs().join("quick.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown metric 'random'"));
}

#[test]
fn lattice_compare_has_one_row_per_size() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "lat.toml",
        "schema_version = 1\n[sampling]\nsamples = 40\nbootstrap = 20\n[planner]\ncandidate_spacing = 0.1\n[evaluation]\ntest_points = 10\nfresh_measurements = false\n",
    );
    let out = tmp.path().join("cmp");
    let o = bin()
        .args(["compare", "--metrics", "lattice", "--seeds", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("FLOWLEARN_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(out.join("curves.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 7);
    for (n, row) in (4..=10).zip(&rows) {
        assert_eq!(&row[0], "lattice");
        assert_eq!(row[1].to_string(), format!("{n}x{n}"));
        assert_eq!(row[3].parse::<usize>().unwrap(), n * n);
    }
    for (file, h) in golden_headers().iter().filter(|(f, _)| out.join(f).exists()) {
        assert_eq!(&header(&out.join(file)), h, "{file} header changed");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("10x10"));
}

#[test]
fn shipped_desk_config_matches_the_defaults() {
    let e = Experiment::load(&configs().join("desk.toml")).unwrap();
    assert_eq!(e.config, RunConfig::default());
    Experiment::load(&configs().join("quick.toml")).unwrap();
}

fn oracle(kind: &str, instance: &serde_json::Value) -> Output {
    let tmp = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(tmp.path(), instance.to_string()).unwrap();
    bin().args(["oracle", kind]).arg(tmp.path()).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn dense_gp_oracle_matches_library_on_three_points() {
    let obs = [([0.2, 0.3], 0.31, 0.28, 1e-4, 0.05), ([0.4, 0.35], 0.2, 0.27, 2e-4, 0.07), ([0.3, 0.6], 0.25, 0.24, 1e-4, 0.06)];
    let queries = [[0.25, 0.4], [0.5, 0.5], [1.5, 1.5]];
    let instance = serde_json::json!({
        "kernel": {"sigma0": 0.14, "length": 0.35, "n0": 200.0, "q_ref": 0.78},
        "observations": obs.iter().map(|(x, v, m, n, i)| serde_json::json!({"x": x, "value": v, "mean": m, "noise": n, "intensity": i})).collect::<Vec<_>>(),
        "queries": queries.iter().map(|x| serde_json::json!({"x": x, "mean": 0.3 - 0.1 * x[1], "intensity": 0.05 + 0.02 * x[0]})).collect::<Vec<_>>(),
    });
    let reference = json(&oracle("dense-gp", &instance));

    // the library with the same intensity and mean fields, evaluated where the instance samples them
    let table: Vec<([f64; 2], f64)> = obs.iter().map(|o| (o.0, o.4)).collect();
    let intensity: Arc<dyn ScalarField<f64>> = Arc::new(move |p: Point2<f64>| {
        table.iter().find(|(x, _)| x[0] == p.x && x[1] == p.y).map_or(0.05 + 0.02 * p.x, |t| t.1)
    });
    let mean: Arc<dyn ScalarField<f64>> = Arc::new(|p: Point2<f64>| 0.3 - 0.1 * p.y);
    let params = KernelParams { sigma0: 0.14, length: 0.35, n0: 200.0, q_ref: 0.78 };
    let mut f = GaussianField::new(mean, Kernel::velocity(params, intensity).unwrap());
    for (x, v, m, n, _) in obs {
        f.absorb(Observation { x: Point2::new(x[0], x[1]), y: v, mean: m, noise: n }).unwrap();
    }
    let lib = f.condition(&queries.map(|q| Point2::new(q[0], q[1])));
    for (k, (m, v)) in lib.iter().enumerate() {
        let rm = reference[k]["mean"].as_f64().unwrap();
        let rv = reference[k]["variance"].as_f64().unwrap();
        assert!((m - rm).abs() <= 1e-8 * rm.abs().max(1.0), "{m} vs {rm}");
        assert!((v - rv).abs() <= 1e-8 * rv.abs().max(1e-2), "{v} vs {rv}");
    }
}

#[test]
fn subset_entropy_oracle_enumerates_all_subsets() {
    let points: Vec<[f64; 2]> = (0..8).map(|i| [0.13 * i as f64, 0.07 * (i % 4) as f64]).collect();
    let instance = serde_json::json!({
        "points": points, "kernel": {"sigma0": 1.0, "length": 0.35, "n0": 200.0, "q_ref": 0.78}, "noise": 0.01, "size": 3
    });
    let r = json(&oracle("subset-entropy", &instance));
    assert_eq!(r["subsets"], 56);
    assert_eq!(r["best"].as_array().unwrap().len(), 3);
}

#[test]
fn mixture_oracle_with_one_active_component_returns_its_moments() {
    let instance = serde_json::json!({"means": [0.4, 2.0, -1.0], "variances": [0.01, 0.5, 0.3], "weights": [1.0, 0.0, 0.0], "draws": 200000, "seed": 3});
    let r = json(&oracle("mixture-moments", &instance));
    assert_eq!(r["analytic"]["mean"], 0.4);
    assert!((r["analytic"]["variance"].as_f64().unwrap() - 0.01).abs() < 1e-15);
    assert!((r["monte_carlo"]["mean"].as_f64().unwrap() - 0.4).abs() < 1e-3);
    assert!((r["monte_carlo"]["variance"].as_f64().unwrap() / 0.01 - 1.0).abs() < 0.02);
}

#[test]
fn srom_and_bootstrap_oracles_answer() {
    let srom = serde_json::json!({
        "x0": [1.0, 1.0], "gamma": 0.025, "mean_coefficients": [0.1, 0.2, -0.1, 0.0, 0.0, 0.0],
        "prior_variance": 0.02, "measurement_variance": 1e-4, "draws": 100000, "seed": 1
    });
    let r = json(&oracle("srom-moments", &srom));
    assert!((r["mean"].as_f64().unwrap() - 0.2).abs() < 1e-3);
    let boot = serde_json::json!({"n": 50, "regenerations": 40, "mean": [0.3, 0.0], "std": [0.05, 0.05], "q_ref": 0.78, "seed": 2});
    let r = json(&oracle("nested-bootstrap", &boot));
    assert!(r["variance"].as_f64().unwrap() > 0.0);
    assert!(r.get("records").is_none());
}

#[test]
fn malformed_oracle_instance_exits_2() {
    let o = oracle("dense-gp", &serde_json::json!({"kernel": {"sigma0": 1.0}}));
    assert_eq!(o.status.code(), Some(2));
    let o = oracle("subset-entropy", &serde_json::json!({
        "points": [[0.0, 0.0]], "kernel": {"sigma0": 1.0, "length": 0.35, "n0": 200.0, "q_ref": 0.78}, "noise": 0.01, "size": 3
    }));
    assert_eq!(o.status.code(), Some(2));
}
