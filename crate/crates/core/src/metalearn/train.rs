use std::collections::BTreeMap;

use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::proto::{meta_loss, prototypes, task_loss};
use super::tasks::{sample_tasks, EpisodeTask};
use super::{Model, ModelParams, TrainConfig};
use crate::encoder::{embed_node, NodeEmbedding, PreparedGraph};
use crate::error::{CgflError, Result};
use crate::numerics::{Adam, ParamStore, Tape, Var};
use crate::scoring::{graph_scores, node_score, task_scores, ScoreSet};
use crate::seed::{derive_seed, rng_for};

/// Per-graph memo of node embeddings and node scores on one tape.
#[derive(Debug, Default)]
pub struct EmbedCache {
    embeddings: BTreeMap<usize, NodeEmbedding>,
    scores: BTreeMap<usize, Var>,
}

impl EmbedCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn embed(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        params: &ModelParams,
        graph: &PreparedGraph,
        v: usize,
    ) -> Result<NodeEmbedding> {
        if let Some(&e) = self.embeddings.get(&v) {
            return Ok(e);
        }
        let e = embed_node(tape, store, &params.encoder, &params.cfg, graph.inputs(v)?);
        self.embeddings.insert(v, e);
        Ok(e)
    }

    pub fn node_score(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        params: &ModelParams,
        graph: &PreparedGraph,
        v: usize,
    ) -> Result<Var> {
        if let Some(&s) = self.scores.get(&v) {
            return Ok(s);
        }
        let s = node_score(tape, store, &params.scores, &params.cfg, graph.inputs(v)?);
        self.scores.insert(v, s);
        Ok(s)
    }
}

/// Negative log-likelihood of one task's queries under prototypes built
/// from its support nodes. With `use_node_score` false (or K = 1) the
/// support nodes are weighted uniformly.
pub fn episode_loss(
    tape: &mut Tape,
    store: &ParamStore,
    params: &ModelParams,
    graph: &PreparedGraph,
    task: &EpisodeTask,
    use_node_score: bool,
    cache: &mut EmbedCache,
) -> Result<Var> {
    let protos = task_prototypes(tape, store, params, graph, task, use_node_score, cache)?;
    let mut queries = Vec::with_capacity(task.query.len());
    for &(v, y) in &task.query {
        let h = cache.embed(tape, store, params, graph, v)?.h;
        let pos = task
            .position(y)
            .ok_or_else(|| CgflError::ContractViolation(format!("query label {y} not in task")))?;
        queries.push((h, pos));
    }
    task_loss(tape, &queries, &protos)
}

pub(crate) fn task_prototypes(
    tape: &mut Tape,
    store: &ParamStore,
    params: &ModelParams,
    graph: &PreparedGraph,
    task: &EpisodeTask,
    use_node_score: bool,
    cache: &mut EmbedCache,
) -> Result<Vec<Var>> {
    let weighted = use_node_score && task.k_shot() > 1;
    let mut support = Vec::with_capacity(task.n_way());
    let mut scores = Vec::with_capacity(task.n_way());
    for pos in 0..task.n_way() {
        let mut hs = Vec::new();
        let mut ns = Vec::new();
        for &(v, _) in task.support_of(pos) {
            hs.push(cache.embed(tape, store, params, graph, v)?.h);
            if weighted {
                ns.push(cache.node_score(tape, store, params, graph, v)?);
            }
        }
        support.push(hs);
        scores.push(ns);
    }
    prototypes(tape, &support, weighted.then_some(scores.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub meta_loss: f64,
    pub gs: Vec<f64>,
    pub mean_ts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Scores of the last epoch.
    pub scores: ScoreSet,
    pub tasks: Vec<Vec<EpisodeTask>>,
}

fn mean_of(rows: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for r in rows {
        for (o, x) in out.iter_mut().zip(r.iter()) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= rows.len() as f64);
    out
}

/// Mean mean-view vector of `N * K * m` target nodes drawn with
/// replacement from the labelled node types, evaluated without gradients.
fn target_representation(
    target: &PreparedGraph,
    model: &Model,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let pool: Vec<usize> = target
        .graph
        .labeled_types()
        .into_iter()
        .flat_map(|t| target.graph.nodes_of_type(t))
        .collect();
    if pool.is_empty() {
        return Err(CgflError::invalid("target graph has no labelled node type"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(pool[rng.random_range(0..pool.len())]).or_default() += 1;
    }
    let mut tape = Tape::detached();
    let mut cache = EmbedCache::new();
    let mut acc = vec![0.0; model.params.cfg.d()];
    for (&v, &n) in &counts {
        let e = cache.embed(&mut tape, &model.store, &model.params, target, v)?;
        for (a, x) in acc.iter_mut().zip(tape.value(e.h_mean)) {
            *a += n as f64 * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= draws as f64);
    Ok(acc)
}

fn uniform(tape: &mut Tape, n: usize) -> Var {
    tape.constant(n, 1, vec![1.0 / n as f64; n])
}

/// Full-batch episodic training: one Adam step per epoch on the score
/// weighted sum of all task losses. Tasks are drawn once per seed.
pub fn meta_train(
    sources: &[PreparedGraph],
    target: &PreparedGraph,
    model: &mut Model,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(CgflError::invalid("meta-training needs at least one source graph"));
    }
    let tasks: Vec<Vec<EpisodeTask>> = sources
        .iter()
        .enumerate()
        .map(|(i, g)| sample_tasks(&g.graph, i, cfg.n_way, cfg.k_shot, cfg.tasks_per_graph, seed))
        .collect::<Result<_>>()?;
    let mut opt = Adam::new(cfg.learning_rate)?;
    let draws = cfg.n_way * cfg.k_shot * cfg.tasks_per_graph;
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut last = ScoreSet::default();

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let mut caches: Vec<EmbedCache> = sources.iter().map(|_| EmbedCache::new()).collect();
        let params = model.params.clone();

        let mut reps = Vec::with_capacity(sources.len());
        for (i, g) in sources.iter().enumerate() {
            let mut nodes: Vec<usize> = tasks[i].iter().flat_map(EpisodeTask::nodes).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let mut rows = Vec::with_capacity(nodes.len());
            for v in nodes {
                rows.push(caches[i].embed(&mut tape, &model.store, &params, g, v)?.h_mean);
            }
            let vals: Vec<&[f64]> = rows.iter().map(|&r| tape.value(r)).collect();
            reps.push(mean_of(&vals));
        }
        let gs = if cfg.use_graph_score {
            let mut rng = rng_for(seed, "target-sample", epoch as u64);
            let h_t = target_representation(target, model, draws, &mut rng)?;
            graph_scores(&mut tape, &model.store, &params.scores, &reps, &h_t)?
        } else {
            uniform(&mut tape, sources.len())
        };

        let mut losses = Vec::with_capacity(sources.len());
        let mut ts = Vec::with_capacity(sources.len());
        for (i, g) in sources.iter().enumerate() {
            let mut per_task = Vec::with_capacity(tasks[i].len());
            let mut pairs = Vec::with_capacity(tasks[i].len());
            for task in &tasks[i] {
                let cache = &mut caches[i];
                per_task.push(episode_loss(
                    &mut tape,
                    &model.store,
                    &params,
                    g,
                    task,
                    cfg.use_node_score,
                    cache,
                )?);
                if cfg.use_task_score {
                    let mut side = |set: &[(usize, usize)]| -> Result<Vec<f64>> {
                        let mut rows = Vec::with_capacity(set.len());
                        for &(v, _) in set {
                            rows.push(cache.embed(&mut tape, &model.store, &params, g, v)?.h_sum);
                        }
                        let vals: Vec<&[f64]> = rows.iter().map(|&r| tape.value(r)).collect();
                        Ok(mean_of(&vals))
                    };
                    let s = side(&task.support)?;
                    let q = side(&task.query)?;
                    pairs.push((s, q));
                }
            }
            ts.push(if cfg.use_task_score {
                task_scores(&mut tape, &model.store, &params.scores, &pairs)?
            } else {
                uniform(&mut tape, per_task.len())
            });
            losses.push(per_task);
        }

        let loss = meta_loss(&mut tape, &losses, gs, &ts)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(CgflError::Divergence { epoch, loss: value });
        }
        last = ScoreSet {
            gs: tape.value(gs).to_vec(),
            ts: ts.iter().map(|&t| tape.value(t).to_vec()).collect(),
        };
        tape.backward(loss, &mut model.store)?;
        opt.step(&mut model.store)?;

        let log = EpochLog {
            epoch,
            meta_loss: value,
            gs: last.gs.clone(),
            mean_ts: last.mean_ts(),
        };
        debug!("epoch {epoch}: meta loss {value:.6}, gs {:?}", log.gs);
        logs.push(log);
    }
    if let (Some(first), Some(end)) = (logs.first(), logs.last()) {
        info!(
            "trained {} epochs, meta loss {:.4} -> {:.4}",
            logs.len(),
            first.meta_loss,
            end.meta_loss
        );
    }
    Ok(TrainReport {
        epochs: logs,
        scores: last,
        tasks,
    })
}

/// Seed used for target-side test tasks, kept apart from training draws.
pub(crate) fn test_seed(seed: u64) -> u64 {
    derive_seed(seed, "test-tasks", 0)
}
