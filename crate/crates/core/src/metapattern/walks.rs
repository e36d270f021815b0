use rand::Rng;

use super::MinerConfig;
use crate::hetgraph::HetGraph;
use crate::seed::rng_for;

/// Random walks, `n_path` per start node, in node order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WalkSet {
    pub walks: Vec<Vec<usize>>,
}

impl WalkSet {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.walks.iter().map(Vec::as_slice)
    }
}

/// Uniform-neighbour walks of `walk_length` edges. Each start node draws
/// from its own stream derived from `(seed, node)`; an isolated node yields
/// a single-node walk.
pub fn sample_walks(g: &HetGraph, cfg: &MinerConfig) -> WalkSet {
    let mut walks = Vec::with_capacity(g.num_nodes() * cfg.n_path);
    for v in 0..g.num_nodes() {
        let mut rng = rng_for(cfg.seed, "walk", v as u64);
        for _ in 0..cfg.n_path {
            let mut walk = Vec::with_capacity(cfg.walk_length + 1);
            walk.push(v);
            let mut cur = v;
            for _ in 0..cfg.walk_length {
                let nbrs = g.neighbors(cur);
                if nbrs.is_empty() {
                    break;
                }
                cur = nbrs[rng.random_range(0..nbrs.len())];
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    WalkSet { walks }
}
