use rand::Rng;
use serde::{Deserialize, Serialize};

use super::proto::neg_sq_distances;
use super::tasks::sample_tasks;
use super::train::{task_prototypes, test_seed, EmbedCache};
use super::{Model, TrainConfig};
use crate::encoder::PreparedGraph;
use crate::error::{CgflError, Result};
use crate::numerics::Tape;
use crate::seed::rng_for;

/// `m[true][pred]` counts.
pub fn confusion_matrix(truth: &[usize], pred: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1;
    }
    m
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    hits as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 from a confusion matrix. A class with
/// no true positives scores 0.
pub fn macro_f1(confusion: &[Vec<usize>]) -> f64 {
    let n = confusion.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..n {
        let tp = confusion[c][c] as f64;
        let fp: f64 = (0..n).filter(|&r| r != c).map(|r| confusion[r][c] as f64).sum();
        let fn_: f64 = (0..n).filter(|&p| p != c).map(|p| confusion[c][p] as f64).sum();
        if tp > 0.0 {
            total += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub tasks: Vec<TaskMetrics>,
}

/// Index of the largest entry; exact ties are broken uniformly at random.
fn argmax_random_ties(v: &[f64], rng: &mut impl Rng) -> usize {
    let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..v.len()).filter(|&i| v[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Training-free evaluation on held-out target tasks. Runs entirely on a
/// detached tape, so the model cannot change.
pub fn meta_test(
    target: &PreparedGraph,
    model: &Model,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TestReport> {
    cfg.validate()?;
    let tasks = sample_tasks(
        &target.graph,
        0,
        cfg.n_way,
        cfg.k_shot,
        cfg.test_tasks,
        test_seed(seed),
    )?;
    let mut tape = Tape::detached();
    let mut cache = EmbedCache::new();
    let mut per_task = Vec::with_capacity(tasks.len());
    for (j, task) in tasks.iter().enumerate() {
        let protos = task_prototypes(
            &mut tape,
            &model.store,
            &model.params,
            target,
            task,
            cfg.use_node_score,
            &mut cache,
        )?;
        let mut rng = rng_for(seed, "ties", j as u64);
        let mut truth = Vec::with_capacity(task.query.len());
        let mut pred = Vec::with_capacity(task.query.len());
        for &(v, y) in &task.query {
            let h = cache.embed(&mut tape, &model.store, &model.params, target, v)?.h;
            let scores = neg_sq_distances(&mut tape, h, &protos);
            pred.push(argmax_random_ties(tape.value(scores), &mut rng));
            truth.push(task.position(y).ok_or_else(|| {
                CgflError::ContractViolation(format!("query label {y} not in task"))
            })?);
        }
        per_task.push(TaskMetrics {
            accuracy: accuracy(&truth, &pred),
            macro_f1: macro_f1(&confusion_matrix(&truth, &pred, task.n_way())),
        });
    }
    let n = per_task.len() as f64;
    Ok(TestReport {
        accuracy: per_task.iter().map(|t| t.accuracy).sum::<f64>() / n,
        macro_f1: per_task.iter().map(|t| t.macro_f1).sum::<f64>() / n,
        tasks: per_task,
    })
}
