//! Mining, training and testing for one experiment config, and the run
//! directory it writes:
//!
//! ```text
//! <run>/catalogs/<graph>.json   mined meta-patterns per graph
//! <run>/logs/seed-<s>.jsonl     one epoch log per line
//! <run>/results.csv             one row per seed
//! <run>/metrics.json            mean and std over the seeds
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cgfl_core::encoder::PreparedGraph;
use cgfl_core::hetgraph::{check_disjoint_heterogeneity, generate_synthetic, load_graph};
use cgfl_core::metalearn::{meta_test, meta_train, EpochLog, Model};
use cgfl_core::metapattern::mine_catalog;
use cgfl_core::{FeatureProjector, HetGraph, PatternCatalog, Role};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GraphSource};
use crate::error::{HarnessError, Result};

/// A graph with its catalog and projected input features; everything that
/// does not depend on the run seed.
#[derive(Debug, Clone)]
pub struct MinedGraph {
    pub graph: HetGraph,
    pub catalog: PatternCatalog,
    pub features: Vec<Vec<f64>>,
}

impl MinedGraph {
    pub fn name(&self) -> &str {
        self.graph.name()
    }

    fn prepare(&self, cfg: &ExperimentConfig, seed: u64) -> Result<PreparedGraph> {
        Ok(PreparedGraph::new(
            self.graph.clone(),
            self.catalog.clone(),
            self.features.clone(),
            &cfg.encoder,
            seed,
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct MinedProblem {
    pub sources: Vec<MinedGraph>,
    pub target: MinedGraph,
}

impl MinedProblem {
    pub fn graphs(&self) -> impl Iterator<Item = &MinedGraph> {
        self.sources.iter().chain(std::iter::once(&self.target))
    }
}

fn build_graph(cfg: &ExperimentConfig, src: &GraphSource, role: Role) -> Result<HetGraph> {
    let g = match src {
        GraphSource::Manifest(p) => load_graph(&cfg.resolve(p))?,
        GraphSource::Synthetic(spec) => generate_synthetic(spec)?,
    };
    if g.labeled_types().is_empty() {
        return Err(HarnessError::Config(format!("graph `{}` has no labelled nodes", g.name())));
    }
    Ok(g.with_role(role))
}

/// Builds every graph and enforces cross-heterogeneity. No mining happens
/// here, so config mistakes surface before any real work.
pub fn load_graphs(cfg: &ExperimentConfig) -> Result<(Vec<HetGraph>, HetGraph)> {
    let target = build_graph(cfg, &cfg.target, Role::Target)?;
    let mut sources = Vec::with_capacity(cfg.sources.len());
    for s in &cfg.sources {
        let g = build_graph(cfg, s, Role::Source)?;
        if cfg.cross_heterogeneity {
            check_disjoint_heterogeneity(&g, &target)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        sources.push(g);
    }
    Ok((sources, target))
}

pub fn mine_graph(cfg: &ExperimentConfig, graph: HetGraph) -> Result<MinedGraph> {
    let catalog = mine_catalog(&graph, &cfg.miner)?;
    let features = FeatureProjector::new(cfg.encoder.d_in, cfg.projector_seed)
        .covering(&graph)
        .prepare(&graph)?;
    info!("{}: {} meta-patterns", graph.name(), catalog.len());
    Ok(MinedGraph {
        graph,
        catalog,
        features,
    })
}

pub fn mine_problem(cfg: &ExperimentConfig) -> Result<MinedProblem> {
    let (sources, target) = load_graphs(cfg)?;
    Ok(MinedProblem {
        sources: sources
            .into_iter()
            .map(|g| mine_graph(cfg, g))
            .collect::<Result<_>>()?,
        target: mine_graph(cfg, target)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub final_meta_loss: f64,
    /// Final-epoch graph score per source, in config order.
    pub gs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub name: String,
    pub seeds: Vec<u64>,
    pub n_way: usize,
    pub k_shot: usize,
    pub sources: Vec<String>,
    pub target: String,
    pub accuracy: Summary,
    pub macro_f1: Summary,
    /// Graph score per source, aligned with `sources`.
    pub gs: Vec<Summary>,
}

impl Metrics {
    pub fn from_results(cfg: &ExperimentConfig, problem: &MinedProblem, rows: &[SeedResult]) -> Self {
        let col = |f: &dyn Fn(&SeedResult) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        Self {
            name: cfg.name.clone(),
            seeds: rows.iter().map(|r| r.seed).collect(),
            n_way: cfg.training.n_way,
            k_shot: cfg.training.k_shot,
            sources: problem.sources.iter().map(|g| g.name().to_string()).collect(),
            target: problem.target.name().to_string(),
            accuracy: Summary::of(&col(&|r| r.accuracy)),
            macro_f1: Summary::of(&col(&|r| r.macro_f1)),
            gs: (0..problem.sources.len())
                .map(|i| Summary::of(&col(&|r| r.gs[i])))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub run_dir: PathBuf,
    pub results: Vec<SeedResult>,
    pub metrics: Metrics,
}

/// Trains and tests one seed.
pub fn run_seed(
    cfg: &ExperimentConfig,
    problem: &MinedProblem,
    seed: u64,
) -> Result<(SeedResult, Vec<EpochLog>)> {
    let sources: Vec<PreparedGraph> = problem
        .sources
        .iter()
        .map(|g| g.prepare(cfg, seed))
        .collect::<Result<_>>()?;
    let target = problem.target.prepare(cfg, seed)?;
    let mut model = Model::new(&cfg.encoder, seed)?;
    let report = meta_train(&sources, &target, &mut model, &cfg.training, seed)?;
    let test = meta_test(&target, &model, &cfg.training, seed)?;
    info!("{} seed {seed}: accuracy {:.4}", cfg.name, test.accuracy);
    let result = SeedResult {
        seed,
        accuracy: test.accuracy,
        macro_f1: test.macro_f1,
        final_meta_loss: report.epochs.last().map_or(f64::NAN, |e| e.meta_loss),
        gs: if report.scores.gs.is_empty() {
            vec![1.0 / sources.len() as f64; sources.len()]
        } else {
            report.scores.gs.clone()
        },
    };
    Ok((result, report.epochs))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| HarnessError::io(p, e))
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(p, bytes).map_err(|e| HarnessError::io(p, e))
}

pub fn write_catalogs(problem: &MinedProblem, run_dir: &Path) -> Result<()> {
    let dir = run_dir.join("catalogs");
    create_dir(&dir)?;
    for g in problem.graphs() {
        let json = serde_json::to_string_pretty(&g.catalog.export(&g.graph))?;
        write_file(&dir.join(format!("{}.json", g.name())), json.as_bytes())?;
    }
    Ok(())
}

fn write_log(dir: &Path, seed: u64, epochs: &[EpochLog]) -> Result<()> {
    let path = dir.join(format!("seed-{seed}.jsonl"));
    let mut out = Vec::new();
    for e in epochs {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    write_file(&path, &out)
}

pub fn results_header(sources: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "accuracy", "macro_f1", "final_meta_loss"]
        .map(String::from)
        .to_vec();
    h.extend(sources.iter().map(|s| format!("gs_{s}")));
    h
}

pub fn write_results(path: &Path, sources: &[String], rows: &[SeedResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(results_header(sources))?;
    for r in rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.accuracy.to_string(),
            r.macro_f1.to_string(),
            r.final_meta_loss.to_string(),
        ];
        rec.extend(r.gs.iter().map(f64::to_string));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<SeedResult>> {
    let mut r = csv::Reader::from_path(path)?;
    let n_gs = r.headers()?.len().saturating_sub(4);
    let bad = |m: String| HarnessError::Config(format!("{}: {m}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|e| bad(format!("column {i}: {e}")))
        };
        rows.push(SeedResult {
            seed: rec[0].parse().map_err(|e| bad(format!("seed: {e}")))?,
            accuracy: f(1)?,
            macro_f1: f(2)?,
            final_meta_loss: f(3)?,
            gs: (0..n_gs).map(|i| f(4 + i)).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Metrics> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs every seed of `cfg` on an already mined problem and writes the
/// artifacts into `run_dir`. Seeds run in parallel on `threads` workers;
/// results are merged in seed-list order. Logs of finished seeds are kept
/// even when another seed fails.
pub fn run_mined(
    cfg: &ExperimentConfig,
    problem: &MinedProblem,
    run_dir: &Path,
    threads: usize,
) -> Result<ExperimentOutcome> {
    create_dir(run_dir)?;
    write_catalogs(problem, run_dir)?;
    let logs = run_dir.join("logs");
    create_dir(&logs)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<(SeedResult, Vec<EpochLog>)>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| run_seed(cfg, problem, s))
            .collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    let mut first_err = None;
    for (seed, out) in cfg.seeds.iter().zip(outcomes) {
        match out {
            Ok((r, epochs)) => {
                write_log(&logs, *seed, &epochs)?;
                results.push(r);
            }
            Err(e) => {
                log::error!("{} seed {seed} failed: {e}", cfg.name);
                first_err.get_or_insert(e);
            }
        }
    }
    let names: Vec<String> = problem.sources.iter().map(|g| g.name().to_string()).collect();
    write_results(&run_dir.join("results.csv"), &names, &results)?;
    if let Some(e) = first_err {
        return Err(e);
    }
    let metrics = Metrics::from_results(cfg, problem, &results);
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    write_file(&run_dir.join("metrics.json"), json.as_bytes())?;
    let mut f = fs::File::create(run_dir.join("config.toml"))
        .map_err(|e| HarnessError::io(run_dir.join("config.toml"), e))?;
    f.write_all(cfg.to_toml()?.as_bytes())
        .map_err(|e| HarnessError::io(run_dir.join("config.toml"), e))?;
    Ok(ExperimentOutcome {
        run_dir: run_dir.to_path_buf(),
        results,
        metrics,
    })
}

/// Generates every synthetic graph of `cfg` and saves it as a TSV graph
/// under `dir`. Returns the manifest paths.
pub fn write_synthetic_graphs(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (i, src) in cfg.graph_sources().enumerate() {
        if let GraphSource::Synthetic(spec) = src {
            let role = if i < cfg.sources.len() { Role::Source } else { Role::Target };
            let g = generate_synthetic(spec)?.with_role(role);
            out.push(cgfl_core::hetgraph::save_graph(&g, dir)?);
        }
    }
    Ok(out)
}

/// Full pipeline for one config: load, mine, train and test every seed.
pub fn run_experiment(cfg: &ExperimentConfig, run_dir: &Path, threads: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let problem = mine_problem(cfg)?;
    run_mined(cfg, &problem, run_dir, threads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(Summary::of(&[0.5]).std, 0.0);
    }

    #[test]
    fn results_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            SeedResult {
                seed: 3,
                accuracy: 0.1 + 0.2,
                macro_f1: 1.0 / 3.0,
                final_meta_loss: std::f64::consts::LN_2,
                gs: vec![0.25, 0.75],
            },
            SeedResult {
                seed: 4,
                accuracy: 1.0,
                macro_f1: 0.0,
                final_meta_loss: 1e-300,
                gs: vec![0.5, 0.5],
            },
        ];
        write_results(&path, &["a".into(), "b".into()], &rows).unwrap();
        assert_eq!(read_results(&path).unwrap(), rows);
    }
}
