//! Graph-, task- and node-level score heads.
//!
//! Graph and task scores take plain vectors, so whatever produced them is
//! cut off from the gradient: only `W_g` and `W_t` learn from these heads.
//! The node score is computed on the live tape and trains `W_s`, `W_c` and
//! `a_c` through the prototypes it weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, NodeInputs};
use crate::error::{CgflError, Result};
use crate::metapattern::Category;
use crate::numerics::{sigmoid, ParamId, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};

/// Guard inside `log(|I| + eta)`.
pub const DEFAULT_ETA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    /// `2d x 1`
    pub w_g: ParamId,
    /// `2d x 1`
    pub w_t: ParamId,
    /// `d_in x 1`
    pub w_s: ParamId,
    /// per category, `d_in x 1`
    pub w_c: [ParamId; 4],
    /// per category, `2 x 1` attention over `[s_v || s_vi]`
    pub a_c: [ParamId; 4],
    pub eta: f64,
}

impl ScoreParams {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.d();
        let w_g = store.add("score.w_g", Tensor::glorot(2 * d, 1, 1.0, rng));
        let w_t = store.add("score.w_t", Tensor::glorot(2 * d, 1, 1.0, rng));
        let w_s = store.add("score.w_s", Tensor::glorot(cfg.d_in, 1, 1.0, rng));
        let mut w_c = [ParamId(0); 4];
        let mut a_c = [ParamId(0); 4];
        for c in Category::ALL {
            w_c[c.index()] = store.add(
                format!("score.w_c.{c}"),
                Tensor::glorot(cfg.d_in, 1, 1.0, rng),
            );
            a_c[c.index()] = store.add(format!("score.a_c.{c}"), Tensor::glorot(2, 1, 1.0, rng));
        }
        Self {
            w_g,
            w_t,
            w_s,
            w_c,
            a_c,
            eta: DEFAULT_ETA,
        }
    }

    pub fn all(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w_g, self.w_t, self.w_s];
        ids.extend(self.w_c);
        ids.extend(self.a_c);
        ids
    }

    /// Parameters of the node-score head only.
    pub fn node_head(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w_s];
        ids.extend(self.w_c);
        ids.extend(self.a_c);
        ids
    }
}

/// softmax over `leaky(W [left_i || right_i])`, one row per pair.
fn pair_softmax(
    tape: &mut Tape,
    store: &ParamStore,
    w: ParamId,
    pairs: &[(&[f64], &[f64])],
) -> Result<Var> {
    let width = pairs[0].0.len() + pairs[0].1.len();
    let mut data = Vec::with_capacity(pairs.len() * width);
    for (l, r) in pairs {
        if l.len() + r.len() != width {
            return Err(CgflError::invalid("score inputs have unequal widths"));
        }
        data.extend_from_slice(l);
        data.extend_from_slice(r);
    }
    let x = tape.constant(pairs.len(), width, data);
    let w = tape.param(store, w);
    let logits = tape.matmul(x, w);
    let logits = tape.leaky_relu(logits, LEAKY_SLOPE);
    Ok(tape.softmax_cols(logits))
}

/// Transferability weight of each source graph against the target, as an
/// `n x 1` column summing to one.
pub fn graph_scores(
    tape: &mut Tape,
    store: &ParamStore,
    params: &ScoreParams,
    sources: &[Vec<f64>],
    target: &[f64],
) -> Result<Var> {
    if sources.is_empty() {
        return Err(CgflError::invalid("graph scores need at least one source graph"));
    }
    let pairs: Vec<(&[f64], &[f64])> = sources.iter().map(|s| (s.as_slice(), target)).collect();
    pair_softmax(tape, store, params.w_g, &pairs)
}

/// Consistency weight of each task of one graph from its (support, query)
/// mean sum-view vectors, as an `m x 1` column summing to one.
pub fn task_scores(
    tape: &mut Tape,
    store: &ParamStore,
    params: &ScoreParams,
    tasks: &[(Vec<f64>, Vec<f64>)],
) -> Result<Var> {
    if tasks.is_empty() {
        return Err(CgflError::invalid("task scores need at least one task"));
    }
    let pairs: Vec<(&[f64], &[f64])> = tasks
        .iter()
        .map(|(s, q)| (s.as_slice(), q.as_slice()))
        .collect();
    pair_softmax(tape, store, params.w_t, &pairs)
}

/// `sigmoid(log(count + eta) * weighted)`, the per-category node score.
pub fn popularity_score(count: usize, weighted: f64, eta: f64) -> f64 {
    sigmoid((count as f64 + eta).ln() * weighted)
}

/// Informativeness of a node: mean over the active categories of
/// `sigmoid(log(|I_c| + eta) * sum_i eps_i s_i)`. Returns a `1 x 1` node.
pub fn node_score(
    tape: &mut Tape,
    store: &ParamStore,
    params: &ScoreParams,
    cfg: &EncoderConfig,
    inputs: &NodeInputs,
) -> Var {
    let x_v = tape.row(&inputs.x);
    let w_s = tape.param(store, params.w_s);
    let s_v = tape.matmul(x_v, w_s);
    let s_v = tape.tanh(s_v);
    let mut per_category = Vec::new();
    for c in cfg.active_categories() {
        let ci = inputs.category(c);
        if ci.count == 0 {
            // an empty weighted sum makes the score sigmoid(0)
            per_category.push(tape.scalar_const(0.5));
            continue;
        }
        let n = ci.count;
        let feats = tape.constant(n, cfg.d_in, ci.summed.clone());
        let w_c = tape.param(store, params.w_c[c.index()]);
        let s = tape.matmul(feats, w_c);
        let s = tape.tanh(s);
        let ones = tape.constant(n, 1, vec![1.0; n]);
        let sv_col = tape.matmul(ones, s_v);
        let pair = tape.concat_cols(&[sv_col, s]);
        let a = tape.param(store, params.a_c[c.index()]);
        let e = tape.matmul(pair, a);
        let e = tape.leaky_relu(e, LEAKY_SLOPE);
        let eps = tape.softmax_cols(e);
        let weighted = tape.mul(eps, s);
        let weighted = tape.sum(weighted);
        let scaled = tape.scale(weighted, (n as f64 + params.eta).ln());
        per_category.push(tape.sigmoid(scaled));
    }
    let stacked = tape.concat_rows(&per_category);
    tape.mean_rows(stacked)
}

/// Score values of one epoch, for reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub gs: Vec<f64>,
    /// Per source graph, one weight per task.
    pub ts: Vec<Vec<f64>>,
}

impl ScoreSet {
    pub fn validate(&self) -> Result<()> {
        let check = |v: &[f64], what: &str| -> Result<()> {
            let s: f64 = v.iter().sum();
            if v.iter().any(|&x| !(x > 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(CgflError::ContractViolation(format!(
                    "{what} weights {v:?} are not a positive distribution"
                )));
            }
            Ok(())
        };
        check(&self.gs, "graph")?;
        self.ts.iter().try_for_each(|t| check(t, "task"))
    }

    /// Mean task weight per graph.
    pub fn mean_ts(&self) -> Vec<f64> {
        self.ts
            .iter()
            .map(|t| t.iter().sum::<f64>() / t.len().max(1) as f64)
            .collect()
    }
}
