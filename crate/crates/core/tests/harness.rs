use std::path::Path;
use std::process::Command;

use dpvi::harness::{
    load_config, read_particles_csv, read_points_csv, run_experiment, write_outputs, AlgorithmEntry,
    ExperimentConfig,
};

const SMALL_GMM: &str = r#"{
    "name": "small",
    "target": {"kind": "gmm"},
    "algorithms": ["GFSD", {"name": "D-Blob-CA", "iterations": 50}, {"family": "KSDD", "weight_strategy": "DK", "iterations": 30}],
    "particle_counts": [4, 8],
    "repeats": 2,
    "metrics": ["w2", "ksd", "component_mass"],
    "svg": true,
    "seed": 3
}"#;

fn dpvi() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dpvi"));
    c.env("RUST_LOG", "error");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn algorithm_entries_accept_names_and_objects() {
    let cfg = ExperimentConfig::from_json(SMALL_GMM).unwrap();
    assert_eq!(cfg.algorithms[0], AlgorithmEntry::preset("GFSD"));
    let specs = cfg.resolved_algorithms().unwrap();
    let labels: Vec<String> = specs.iter().map(|s| s.label()).collect();
    assert_eq!(labels, ["GFSD", "D-Blob-CA", "D-KSDD-DK"]);
    assert_eq!(specs[1].iterations, 50);
    assert_eq!(specs[0].eta, 0.05);
}

#[test]
fn unknown_algorithm_key_is_reported() {
    let bad = SMALL_GMM.replace("\"iterations\": 50", "\"iters\": 50");
    let err = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
    assert!(err.contains("iters"), "{err}");
}

#[test]
fn sweep_writes_every_artifact() {
    let mut cfg = ExperimentConfig::from_json(SMALL_GMM).unwrap();
    for a in &mut cfg.algorithms {
        a.iterations.get_or_insert(40);
    }
    let res = run_experiment(&cfg, Some(2)).unwrap();
    assert_eq!(res.runs.len(), 3 * 2 * 2);
    // w2, ksd_squared and one mass row per mixture component
    assert_eq!(res.table.rows.len(), 12 * 4);
    assert!(res.table.rows.iter().filter(|r| r.metric == "ksd_squared").all(|r| r.bandwidth.unwrap() > 0.0));
    for s in res.table.summary() {
        let vals: Vec<f64> = res
            .table
            .rows
            .iter()
            .filter(|r| r.algorithm == s.algorithm && r.particles == s.particles && r.metric == s.metric)
            .map(|r| r.value.unwrap())
            .collect();
        assert!((s.mean - vals.iter().sum::<f64>() / vals.len() as f64).abs() <= 1e-12);
    }
    let order: Vec<(String, usize, usize)> =
        res.runs.iter().map(|r| (r.algorithm.clone(), r.particles, r.repeat)).collect();
    assert_eq!(order[0], ("GFSD".into(), 4, 0));
    assert_eq!(order[3], ("GFSD".into(), 8, 1));
    assert_eq!(order[4], ("D-Blob-CA".into(), 4, 0));

    let dir = tempfile::tempdir().unwrap();
    write_outputs(&res, &cfg, dir.path()).unwrap();
    for f in ["results.csv", "summary.csv", "run_meta.json", "reference.csv", "particles_D-Blob-CA_8_1.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert!(dir.path().join("scatter_D-KSDD-DK_8.svg").exists());
    let back = read_particles_csv(dir.path().join("particles_D-Blob-CA_8_1.csv")).unwrap();
    let run = res.runs.iter().find(|r| r.algorithm == "D-Blob-CA" && r.particles == 8 && r.repeat == 1).unwrap();
    assert_eq!(&back, run.ensemble.as_ref().unwrap());
    assert_eq!(read_points_csv(dir.path().join("reference.csv")).unwrap(), res.reference);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["runs"].as_array().unwrap().len(), 12);
}

#[test]
fn one_run_one_metric_one_row() {
    for metric in ["w2", "ksd"] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"target": {{"kind": "gmm"}}, "algorithms": [{{"name": "GFSD", "iterations": 3}}],
                "particle_counts": [4], "metrics": ["{metric}"], "seed": 2}}"#
        ))
        .unwrap();
        let res = run_experiment(&cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&res, &cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text.lines().count(), 2, "{text}");
    }
}

#[test]
fn failing_runs_become_error_rows() {
    // an absurd step size overflows the positions within a few iterations
    let cfg = ExperimentConfig::from_json(
        r#"{"target": {"kind": "gaussian", "mean": [0.0], "covariance": [[1.0]]},
            "algorithms": [{"name": "GFSD", "eta": 1e200, "iterations": 5}, {"name": "Blob", "iterations": 5}],
            "particle_counts": [3], "seed": 1}"#,
    )
    .unwrap();
    let res = run_experiment(&cfg, Some(1)).unwrap();
    let errors: Vec<_> = res.table.errors().collect();
    assert_eq!(errors.len(), 1, "{:?}", res.table.rows);
    assert_eq!(errors[0].algorithm, "GFSD");
    assert!(res.table.mean("Blob", 3, "w2").is_some());
}

#[test]
fn cli_validate_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", SMALL_GMM);
    let out = dpvi().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = write(dir.path(), "bad.json", &SMALL_GMM.replace("\"repeats\": 2", "\"repeats\": 0"));
    assert_eq!(dpvi().args(["validate", "--config"]).arg(&bad).status().unwrap().code(), Some(1));
    let broken = write(dir.path(), "broken.json", "{ not json");
    assert_eq!(dpvi().args(["run", "--config"]).arg(&broken).status().unwrap().code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(dpvi().args(["validate", "--config"]).arg(&missing).status().unwrap().code(), Some(1));

    let target = write(dir.path(), "target.json", r#"{"kind": "gmm"}"#);
    let status = dpvi()
        .args(["metrics", "--particles"])
        .arg(dir.path().join("absent.csv"))
        .arg("--target")
        .arg(&target)
        .arg("--reference")
        .arg(dir.path().join("absent_ref.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_run_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"target": {"kind": "gmm"}, "algorithms": [{"name": "D-GFSD-CA", "iterations": 100}],
            "particle_counts": [6], "seed": 9}"#,
    );
    let out_dir = dir.path().join("out");
    let status = dpvi()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .env("DPVI_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let target = write(dir.path(), "target.json", r#"{"kind": "gmm"}"#);
    let out = dpvi()
        .args(["metrics", "--particles"])
        .arg(out_dir.join("particles_D-GFSD-CA_6_0.csv"))
        .arg("--target")
        .arg(&target)
        .arg("--reference")
        .arg(out_dir.join("reference.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // the CLI recomputes exactly what the sweep recorded
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let w2_row = results.lines().find(|l| l.contains(",w2,")).unwrap();
    let recorded: f64 = w2_row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((v["w2"].as_f64().unwrap() - recorded).abs() < 1e-12);
    assert!(v["mass_c1"].as_f64().is_some());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.resolved_algorithms().unwrap();
        seen += 1;
    }
    assert!(seen >= 2);
}
