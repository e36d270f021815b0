use std::fs;
use std::path::Path;
use std::process::Command;

use cgfl_cli::ablation::{read_report, run_param_sweep};
use cgfl_cli::experiment::{read_metrics, read_results, run_experiment, write_synthetic_graphs};
use cgfl_cli::{ExperimentConfig, GraphSource, HarnessError, SweepParam};

fn graph(table: &str, name: &str, prefix: &str, seed: u64) -> String {
    format!(
        r#"
[{table}.synthetic]
name = "{name}"
type_prefix = "{prefix}"
communities = 2
members_per_community = 30
items = 6
item_degree = 3
intra_density = 0.03
member_dim = 4
hub_dim = 2
item_dim = 2
seed = {seed}
"#
    )
}

fn minimal_toml(seeds: &str) -> String {
    format!(
        r#"
name = "mini"
seeds = {seeds}

[encoder]
d_in = 8
d_head = 4
k_att = 2
d_att = 6
instance_cap = 4

[training]
epochs = 3
tasks_per_graph = 4
test_tasks = 10

[[sources]]
{}
[target]
{}
"#,
        graph("sources", "a", "a:", 1),
        graph("target", "t", "t:", 2)
    )
}

fn minimal(seeds: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&minimal_toml(seeds), Path::new(".")).unwrap()
}

#[test]
fn smoke_run_writes_parseable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&minimal("[1]"), dir.path(), 1).unwrap();
    let d = dir.path();
    for f in ["catalogs/a.json", "catalogs/t.json", "logs/seed-1.jsonl", "results.csv", "metrics.json"] {
        assert!(d.join(f).is_file(), "{f} missing");
    }
    let catalog: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("catalogs/a.json")).unwrap()).unwrap();
    assert!(!catalog.as_array().unwrap().is_empty());
    let log = fs::read_to_string(d.join("logs/seed-1.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    for line in log.lines() {
        let _: cgfl_core::metalearn::EpochLog = serde_json::from_str(line).unwrap();
    }
    assert_eq!(read_results(&d.join("results.csv")).unwrap(), out.results);
    assert_eq!(read_metrics(&d.join("metrics.json")).unwrap(), out.metrics);
    // the copied config reloads to the same experiment
    let copy = ExperimentConfig::load(&d.join("config.toml")).unwrap();
    assert_eq!(copy.seeds, vec![1]);
}

#[test]
fn metrics_mean_matches_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&minimal("[1, 2, 3]"), dir.path(), 2).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    let m = read_metrics(&dir.path().join("metrics.json")).unwrap();
    let mean = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    assert!((m.accuracy.mean - mean).abs() <= 1e-12);
    let f1 = rows.iter().map(|r| r.macro_f1).sum::<f64>() / rows.len() as f64;
    assert!((m.macro_f1.mean - f1).abs() <= 1e-12);
    assert_eq!(m.seeds, vec![1, 2, 3]);
}

#[test]
fn repeated_seed_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&minimal("[7, 7]"), dir.path(), 1).unwrap();
    assert_eq!(out.results.len(), 2);
    assert_eq!(out.results[0], out.results[1]);
    assert_eq!(out.metrics.accuracy.std, 0.0);
}

#[test]
fn overlapping_types_fail_before_mining() {
    let text = minimal_toml("[1]").replace("type_prefix = \"t:\"", "type_prefix = \"a:\"");
    let cfg = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&cfg, dir.path(), 1).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("cross-heterogeneous"));
    assert!(!dir.path().join("catalogs").exists());
}

#[test]
fn theta_lp_sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_param_sweep(&minimal("[1]"), SweepParam::ThetaLp, &[2.0, 3.0, 4.0], dir.path(), 1).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ok() && r.seeds == "1"));
    assert_eq!(read_report(&dir.path().join("sweep-theta_lp.csv")).unwrap(), rows);
}

#[test]
fn k_mp_extremes_complete() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_param_sweep(&minimal("[1]"), SweepParam::KMp, &[1.0, 20.0], dir.path(), 1).unwrap();
    assert!(rows.iter().all(|r| r.ok()), "{rows:?}");
}

#[test]
fn zero_n_mean_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_param_sweep(&minimal("[1]"), SweepParam::NMean, &[2.0, 0.0], dir.path(), 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("sweep-n_mean.csv").exists());
}

#[test]
fn synthetic_graphs_reload_as_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = minimal("[1]");
    let manifests = write_synthetic_graphs(&cfg, dir.path()).unwrap();
    assert_eq!(manifests.len(), 2);
    let mut from_disk = cfg.clone();
    from_disk.sources = vec![GraphSource::Manifest(manifests[0].clone())];
    from_disk.target = GraphSource::Manifest(manifests[1].clone());
    from_disk.validate().unwrap();
    let a = run_experiment(&cfg, &dir.path().join("gen"), 1).unwrap();
    let b = run_experiment(&from_disk, &dir.path().join("disk"), 1).unwrap();
    // text round trip of the features is exact, so the runs agree
    assert_eq!(a.results, b.results);
}

fn cgfl(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cgfl"))
        .args(args)
        .env("CGFL_OUT", out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("mini.toml");
    fs::write(&cfg_path, minimal_toml("[1, 2]")).unwrap();
    let out_root = dir.path().join("out");
    let cfg = cfg_path.to_str().unwrap();

    let ok = cgfl(&["run", "--config", cfg, "--seed-override", "5"], &out_root);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let m = read_metrics(&out_root.join("mini/metrics.json")).unwrap();
    assert_eq!(m.seeds, vec![5]);

    let mined = cgfl(&["mine", "--config", cfg, "--out", dir.path().join("x").to_str().unwrap()], &out_root);
    assert_eq!(mined.status.code(), Some(0));
    assert!(dir.path().join("x/mini/catalogs/t.json").is_file());

    let bad_path = dir.path().join("bad.toml");
    fs::write(&bad_path, minimal_toml("[]")).unwrap();
    let bad = cgfl(&["run", "--config", bad_path.to_str().unwrap()], &out_root);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("seed list is empty"));

    // a class too small for 3-way tasks is a runtime failure
    let runtime = minimal_toml("[1]").replace("epochs = 3", "epochs = 3\nn_way = 3");
    let rt_path = dir.path().join("rt.toml");
    fs::write(&rt_path, runtime).unwrap();
    let rt = cgfl(&["run", "--config", rt_path.to_str().unwrap()], &out_root);
    assert_eq!(rt.status.code(), Some(3), "{}", String::from_utf8_lossy(&rt.stderr));

    let no_sweep = cgfl(&["sweep", "--config", cfg], &out_root);
    assert_eq!(no_sweep.status.code(), Some(2));
}
