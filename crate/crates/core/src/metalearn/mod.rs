//! Episodic meta-learning across source graphs.
//!
//! Training draws a fixed set of N-way K-shot tasks from every source
//! graph. Each epoch embeds the task nodes, weights every task loss by its
//! graph score and task score, and takes one Adam step on the weighted sum.
//! Evaluation on the target graph is training-free: prototypes from the
//! support nodes (weighted by node scores) classify the queries.

mod eval;
mod proto;
mod tasks;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, EncoderParams, View};
use crate::error::{CgflError, Result};
use crate::metapattern::Category;
use crate::numerics::{ParamStore, DEFAULT_LEARNING_RATE};
use crate::scoring::ScoreParams;
use crate::seed::rng_for;

pub use eval::{accuracy, confusion_matrix, macro_f1, meta_test, TaskMetrics, TestReport};
pub use proto::{
    classify, meta_loss, neg_sq_distances, prototype, prototypes, support_weights, task_loss,
};
pub use tasks::{sample_tasks, EpisodeTask};
pub use train::{episode_loss, meta_train, EmbedCache, EpochLog, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_n")]
    pub n_way: usize,
    #[serde(default = "d_k")]
    pub k_shot: usize,
    /// Training tasks per source graph.
    #[serde(default = "d_m")]
    pub tasks_per_graph: usize,
    /// Held-out tasks on the target graph.
    #[serde(default = "d_m")]
    pub test_tasks: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "yes")]
    pub use_graph_score: bool,
    #[serde(default = "yes")]
    pub use_task_score: bool,
    #[serde(default = "yes")]
    pub use_node_score: bool,
}

fn d_epochs() -> usize {
    100
}
fn d_n() -> usize {
    2
}
fn d_k() -> usize {
    1
}
fn d_m() -> usize {
    100
}
fn d_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}
fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: d_epochs(),
            n_way: d_n(),
            k_shot: d_k(),
            tasks_per_graph: d_m(),
            test_tasks: d_m(),
            learning_rate: d_lr(),
            use_graph_score: true,
            use_task_score: true,
            use_node_score: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(CgflError::Config(format!("training: {m}")));
        if self.n_way < 2 {
            return fail("n_way must be >= 2");
        }
        if self.k_shot < 1 {
            return fail("k_shot must be >= 1");
        }
        if self.tasks_per_graph < 1 || self.test_tasks < 1 {
            return fail("task counts must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be > 0");
        }
        Ok(())
    }
}

/// The base model and its ten single-component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Base,
    NoCategory(Category),
    NoView(View),
    NoGraphScore,
    NoTaskScore,
    NoNodeScore,
}

impl Variant {
    /// Base first, then categories, views and scores.
    pub fn all() -> Vec<Variant> {
        let mut v = vec![Variant::Base];
        v.extend(Category::ALL.map(Variant::NoCategory));
        v.extend(View::ALL.map(Variant::NoView));
        v.extend([Variant::NoGraphScore, Variant::NoTaskScore, Variant::NoNodeScore]);
        v
    }

    pub fn label(&self) -> String {
        match self {
            Variant::Base => "CGFL".into(),
            Variant::NoCategory(c) => format!("M\\{c}"),
            Variant::NoView(w) => {
                let n = w.name();
                format!("M\\{}{}", n[..1].to_uppercase(), &n[1..])
            }
            Variant::NoGraphScore => "M\\G-Score".into(),
            Variant::NoTaskScore => "M\\T-Score".into(),
            Variant::NoNodeScore => "M\\N-Score".into(),
        }
    }

    pub fn apply(&self, enc: &mut EncoderConfig, train: &mut TrainConfig) {
        match *self {
            Variant::Base => {}
            Variant::NoCategory(c) => {
                if !enc.drop_categories.contains(&c) {
                    enc.drop_categories.push(c);
                }
            }
            Variant::NoView(w) => {
                if !enc.drop_views.contains(&w) {
                    enc.drop_views.push(w);
                }
            }
            Variant::NoGraphScore => train.use_graph_score = false,
            Variant::NoTaskScore => train.use_task_score = false,
            Variant::NoNodeScore => train.use_node_score = false,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parameter handles plus the encoder configuration they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub scores: ScoreParams,
    pub cfg: EncoderConfig,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub store: ParamStore,
    pub params: ModelParams,
}

impl Model {
    /// Fresh initialisation drawn from `seed`. Encoder ablations do not
    /// change which tensors exist, so every variant starts from the same
    /// values for a given seed.
    pub fn new(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = rng_for(seed, "init", 0);
        let encoder = EncoderParams::new(&mut store, cfg, &mut rng);
        let scores = ScoreParams::new(&mut store, cfg, &mut rng);
        Ok(Self {
            store,
            params: ModelParams {
                encoder,
                scores,
                cfg: cfg.clone(),
            },
        })
    }
}
