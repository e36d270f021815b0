use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{is_palindrome, Category, PatternCatalog, PatternInstance};
use crate::hetgraph::HetGraph;
use crate::seed::{derive_seed, rng_for};

/// Search budget per (node, pattern): partial paths expanded before the
/// search gives up. Keeps hub nodes from blowing up matching time.
pub const MAX_EXPANSIONS: usize = 20_000;

/// Instances anchored at one node, split by pattern category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceGroups {
    groups: [Vec<PatternInstance>; 4],
}

impl InstanceGroups {
    pub fn get(&self, c: Category) -> &[PatternInstance] {
        &self.groups[c.index()]
    }

    pub fn len(&self, c: Category) -> usize {
        self.groups[c.index()].len()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn push(&mut self, c: Category, inst: PatternInstance) {
        self.groups[c.index()].push(inst);
    }
}

struct Search<'a> {
    g: &'a HetGraph,
    seq: &'a [usize],
    cap: usize,
    budget: usize,
}

impl Search<'_> {
    fn dfs(&mut self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, rng: &mut ChaCha8Rng) {
        if out.len() >= self.cap || self.budget == 0 {
            return;
        }
        self.budget -= 1;
        if path.len() == self.seq.len() {
            out.push(path.clone());
            return;
        }
        let want = self.seq[path.len()];
        let last = *path.last().expect("path starts at the anchor");
        let mut next: Vec<usize> = self
            .g
            .neighbors(last)
            .iter()
            .copied()
            .filter(|&u| self.g.type_of(u) == want && !path.contains(&u))
            .collect();
        next.sort_unstable();
        next.dedup();
        next.shuffle(rng);
        for u in next {
            path.push(u);
            self.dfs(path, out, rng);
            path.pop();
            if out.len() >= self.cap || self.budget == 0 {
                return;
            }
        }
    }
}

fn type_checks(g: &HetGraph, nodes: &[usize], types: &[usize]) -> bool {
    nodes.len() == types.len()
        && (nodes.iter().zip(types).all(|(&v, &t)| g.type_of(v) == t)
            || nodes.iter().zip(types.iter().rev()).all(|(&v, &t)| g.type_of(v) == t))
        && nodes.windows(2).all(|w| g.neighbors(w[0]).contains(&w[1]))
}

/// Seeded depth-first matching of every catalog pattern whose focal type is
/// the type of `v`. Asymmetric patterns are matched in both orientations.
/// At most `cap` simple-path instances are kept per pattern.
pub fn match_instances(
    g: &HetGraph,
    v: usize,
    catalog: &PatternCatalog,
    cap: usize,
    seed: u64,
) -> InstanceGroups {
    let mut groups = InstanceGroups::default();
    if cap == 0 {
        return groups;
    }
    let node_seed = derive_seed(seed, "match", v as u64);
    for p in catalog.for_focal(g.type_of(v)) {
        let pattern = catalog.get(p);
        let category = catalog.category(p);
        let mut rng = rng_for(node_seed, "pattern", p as u64);
        let forward = pattern.types.clone();
        let mut orientations = vec![forward.clone()];
        if !is_palindrome(&forward) {
            orientations.push(forward.iter().rev().copied().collect());
        }
        // random orientation order so the cap does not always favour one
        orientations.shuffle(&mut rng);
        let mut found: Vec<Vec<usize>> = Vec::new();
        let mut search = Search {
            g,
            seq: &[],
            cap,
            budget: MAX_EXPANSIONS,
        };
        for seq in &orientations {
            search.seq = seq;
            let mut path = vec![v];
            search.dfs(&mut path, &mut found, &mut rng);
        }
        for nodes in found {
            assert!(
                type_checks(g, &nodes, &pattern.types),
                "instance {nodes:?} does not match pattern {:?}",
                pattern.types
            );
            groups.push(category, PatternInstance { nodes, pattern: p });
        }
    }
    groups
}
