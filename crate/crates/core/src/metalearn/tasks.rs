use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{CgflError, Result};
use crate::hetgraph::HetGraph;
use crate::seed::rng_for;

/// One N-way K-shot episode. `support` and `query` are class-major:
/// entries `[i*K, (i+1)*K)` belong to `classes[i]`. Labels are graph class
/// ids; [`EpisodeTask::position`] maps them to `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeTask {
    pub graph: usize,
    pub classes: Vec<usize>,
    pub support: Vec<(usize, usize)>,
    pub query: Vec<(usize, usize)>,
}

impl EpisodeTask {
    pub fn n_way(&self) -> usize {
        self.classes.len()
    }

    pub fn k_shot(&self) -> usize {
        self.support.len() / self.classes.len().max(1)
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    /// Support nodes of the class at `pos`.
    pub fn support_of(&self, pos: usize) -> &[(usize, usize)] {
        let k = self.k_shot();
        &self.support[pos * k..(pos + 1) * k]
    }

    /// Support and query nodes, each once.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.iter().chain(&self.query).map(|&(v, _)| v)
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(CgflError::ContractViolation(m));
        if self.support.iter().any(|s| self.query.iter().any(|q| q.0 == s.0)) {
            return fail("support and query overlap".into());
        }
        for &(v, y) in self.support.iter().chain(&self.query) {
            if self.position(y).is_none() {
                return fail(format!("node {v} has label {y} outside the task classes"));
            }
        }
        let k = self.k_shot();
        for pos in 0..self.n_way() {
            let c = self.classes[pos];
            let n_s = self.support.iter().filter(|s| s.1 == c).count();
            let n_q = self.query.iter().filter(|s| s.1 == c).count();
            if n_s != k || n_q != k {
                return fail(format!("class {c} has {n_s} support and {n_q} query nodes, want {k}"));
            }
        }
        Ok(())
    }
}

/// Samples `m` tasks: N distinct classes, then 2K distinct nodes per class
/// split into K support and K query nodes.
pub fn sample_tasks(
    g: &HetGraph,
    graph_index: usize,
    n_way: usize,
    k_shot: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<EpisodeTask>> {
    if n_way < 1 || k_shot < 1 {
        return Err(CgflError::TaskConstruction("N and K must be >= 1".into()));
    }
    let by_class = g.nodes_by_class();
    if by_class.len() < n_way {
        return Err(CgflError::TaskConstruction(format!(
            "graph `{}` declares {} classes, a {n_way}-way task needs {n_way}",
            g.name(),
            by_class.len()
        )));
    }
    for (c, nodes) in by_class.iter().enumerate() {
        if nodes.len() < 2 * k_shot {
            return Err(CgflError::TaskConstruction(format!(
                "class `{}` of graph `{}` has {} labelled nodes, {k_shot}-shot tasks need {}",
                g.classes()[c],
                g.name(),
                nodes.len(),
                2 * k_shot
            )));
        }
    }
    let mut rng = rng_for(seed, "tasks", graph_index as u64);
    let mut tasks = Vec::with_capacity(m);
    for _ in 0..m {
        let classes: Vec<usize> = sample(&mut rng, by_class.len(), n_way).into_vec();
        let mut support = Vec::with_capacity(n_way * k_shot);
        let mut query = Vec::with_capacity(n_way * k_shot);
        for &c in &classes {
            let pool = &by_class[c];
            let picked = sample(&mut rng, pool.len(), 2 * k_shot).into_vec();
            support.extend(picked[..k_shot].iter().map(|&i| (pool[i], c)));
            query.extend(picked[k_shot..].iter().map(|&i| (pool[i], c)));
        }
        let task = EpisodeTask {
            graph: graph_index,
            classes,
            support,
            query,
        };
        task.check()?;
        tasks.push(task);
    }
    Ok(tasks)
}
