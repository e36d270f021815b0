//! Ablation suite and parameter sweeps. Both reuse one seed list across
//! all rows so the columns are comparable.

use std::path::Path;

use cgfl_core::metalearn::Variant;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SweepParam};
use crate::error::{HarnessError, Result};
use crate::experiment::{mine_problem, run_experiment, run_mined, ExperimentOutcome, MinedProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Variant label or swept value.
    pub label: String,
    pub status: String,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub macro_f1_mean: Option<f64>,
    pub macro_f1_std: Option<f64>,
    pub seeds: String,
    pub error: String,
}

impl ReportRow {
    fn from_outcome(label: String, seeds: &[u64], out: Result<ExperimentOutcome>) -> Self {
        let seeds = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        match out {
            Ok(o) => Self {
                label,
                status: "ok".into(),
                accuracy_mean: Some(o.metrics.accuracy.mean),
                accuracy_std: Some(o.metrics.accuracy.std),
                macro_f1_mean: Some(o.metrics.macro_f1.mean),
                macro_f1_std: Some(o.metrics.macro_f1.std),
                seeds,
                error: String::new(),
            },
            Err(e) => {
                warn!("{label} failed: {e}");
                Self {
                    label,
                    status: "failed".into(),
                    accuracy_mean: None,
                    accuracy_std: None,
                    macro_f1_mean: None,
                    macro_f1_std: None,
                    seeds,
                    error: e.to_string(),
                }
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Directory-safe name of a variant: `base`, `no-sap`, `no-g-score`, ...
pub fn variant_slug(v: &Variant) -> String {
    match v {
        Variant::Base => "base".into(),
        other => {
            let label = other.label();
            let tail = label.trim_start_matches("M\\");
            format!("no-{}", tail.to_lowercase())
        }
    }
}

/// Base configuration plus the ten single-component ablations. Graphs are
/// mined once; a failing variant is recorded and the suite moves on.
pub fn run_ablation_suite(cfg: &ExperimentConfig, run_dir: &Path, threads: usize) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let problem = mine_problem(cfg)?;
    let mut rows = Vec::new();
    for v in Variant::all() {
        let mut vc = cfg.clone();
        v.apply(&mut vc.encoder, &mut vc.training);
        info!("ablation variant {v}");
        let dir = run_dir.join("ablation").join(variant_slug(&v));
        let out = vc.validate().and_then(|_| run_mined(&vc, &problem, &dir, threads));
        rows.push(ReportRow::from_outcome(v.label(), &cfg.seeds, out));
    }
    write_report(&run_dir.join("ablation.csv"), &rows)?;
    Ok(rows)
}

/// Parses and checks every swept value before anything runs.
pub fn sweep_configs(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep has no values".into()));
    }
    values
        .iter()
        .map(|&v| {
            let c = param.apply(cfg, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect()
}

/// One row per value of `param`. Miner parameters re-mine the graphs;
/// encoder parameters share one mining pass.
pub fn run_param_sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    run_dir: &Path,
    threads: usize,
) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let configs = sweep_configs(cfg, param, values)?;
    let remine = matches!(param, SweepParam::ThetaMp | SweepParam::ThetaLp | SweepParam::KMp);
    let shared: Option<MinedProblem> = if remine { None } else { Some(mine_problem(cfg)?) };
    let mut rows = Vec::new();
    for (c, v) in configs.iter().zip(values) {
        let dir = run_dir.join(format!("sweep-{param}")).join(v.to_string());
        let out = match &shared {
            Some(p) => run_mined(c, p, &dir, threads),
            None => run_experiment(c, &dir, threads),
        };
        rows.push(ReportRow::from_outcome(v.to_string(), &cfg.seeds, out));
    }
    write_report(&run_dir.join(format!("sweep-{param}.csv")), &rows)?;
    Ok(rows)
}
