use std::collections::BTreeMap;

use rand::seq::index::sample;

use super::{EncoderConfig, View};
use crate::error::{CgflError, Result};
use crate::hetgraph::HetGraph;
use crate::metapattern::{match_instances, Category, InstanceGroups, PatternCatalog, PatternInstance};
use crate::seed::{derive_seed, rng_for};

/// Per (view, category) instance selections, stored as indices into the
/// node's [`InstanceGroups`] for that category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewBundle {
    slices: [[Vec<usize>; 4]; 3],
}

impl ViewBundle {
    pub fn slice(&self, w: View, c: Category) -> &[usize] {
        &self.slices[w.index()][c.index()]
    }
}

/// Sum view keeps every instance, max view keeps the instances of the
/// category's most frequent pattern for this focal type, mean view keeps up
/// to `n_mean` uniformly sampled instances of each pattern.
pub fn build_views(
    groups: &InstanceGroups,
    catalog: &PatternCatalog,
    focal: usize,
    n_mean: usize,
    seed: u64,
) -> ViewBundle {
    let mut bundle = ViewBundle::default();
    for c in Category::ALL {
        let insts = groups.get(c);
        bundle.slices[View::Sum.index()][c.index()] = (0..insts.len()).collect();

        if let Some(pmax) = catalog.max_pattern(focal, c) {
            bundle.slices[View::Max.index()][c.index()] = insts
                .iter()
                .enumerate()
                .filter(|(_, inst)| inst.pattern == pmax)
                .map(|(i, _)| i)
                .collect();
        }

        let mut by_pattern: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, inst) in insts.iter().enumerate() {
            by_pattern.entry(inst.pattern).or_default().push(i);
        }
        let mut mean = Vec::new();
        for (p, idx) in by_pattern {
            if idx.len() <= n_mean {
                mean.extend(idx);
            } else {
                let mut rng = rng_for(seed, "mean-view", p as u64);
                mean.extend(sample(&mut rng, idx.len(), n_mean).iter().map(|k| idx[k]));
            }
        }
        mean.sort_unstable();
        bundle.slices[View::Mean.index()][c.index()] = mean;
    }
    bundle
}

/// Pooled instance features of one category, one row per matched instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryInputs {
    /// `count x d_in`, mean over the nodes of each instance.
    pub pooled: Vec<f64>,
    /// `count x d_in`, sum over the nodes of each instance.
    pub summed: Vec<f64>,
    pub count: usize,
}

/// Everything the encoder and the node-score head need about one node.
/// All of it is constant with respect to the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInputs {
    pub node: usize,
    pub x: Vec<f64>,
    pub categories: [CategoryInputs; 4],
    pub views: ViewBundle,
}

impl NodeInputs {
    pub fn category(&self, c: Category) -> &CategoryInputs {
        &self.categories[c.index()]
    }

    /// Assembles inputs from already matched instances.
    pub fn from_groups(
        features: &[Vec<f64>],
        v: usize,
        groups: &InstanceGroups,
        views: ViewBundle,
    ) -> Result<Self> {
        let d_in = features[v].len();
        let mut categories: [CategoryInputs; 4] = Default::default();
        for c in Category::ALL {
            let ci = &mut categories[c.index()];
            for inst in groups.get(c) {
                let (mean, sum) = pool(features, inst, d_in)?;
                ci.pooled.extend(mean);
                ci.summed.extend(sum);
                ci.count += 1;
            }
        }
        Ok(Self {
            node: v,
            x: features[v].clone(),
            categories,
            views,
        })
    }
}

fn pool(features: &[Vec<f64>], inst: &PatternInstance, d_in: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if inst.nodes.is_empty() {
        return Err(CgflError::invalid("empty pattern instance"));
    }
    let mut sum = vec![0.0; d_in];
    for &u in &inst.nodes {
        for (s, x) in sum.iter_mut().zip(&features[u]) {
            *s += x;
        }
    }
    let k = inst.nodes.len() as f64;
    let mean = sum.iter().map(|s| s / k).collect();
    Ok((mean, sum))
}

/// A graph with projected features, its catalog, and precomputed inputs
/// for every node of a labelled type.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: HetGraph,
    pub catalog: PatternCatalog,
    pub features: Vec<Vec<f64>>,
    inputs: Vec<Option<NodeInputs>>,
}

impl PreparedGraph {
    /// Matches instances and builds views for every labelled-type node;
    /// `seed` drives both the matching search and the mean-view sampling.
    pub fn new(
        graph: HetGraph,
        catalog: PatternCatalog,
        features: Vec<Vec<f64>>,
        cfg: &EncoderConfig,
        seed: u64,
    ) -> Result<Self> {
        if features.len() != graph.num_nodes() {
            return Err(CgflError::invalid(format!(
                "{} feature rows for {} nodes",
                features.len(),
                graph.num_nodes()
            )));
        }
        if let Some(bad) = features.iter().find(|f| f.len() != cfg.d_in) {
            return Err(CgflError::invalid(format!(
                "feature width {} does not match d_in {}",
                bad.len(),
                cfg.d_in
            )));
        }
        let labeled = graph.labeled_types();
        let mut inputs = vec![None; graph.num_nodes()];
        for (v, slot) in inputs.iter_mut().enumerate() {
            if labeled.contains(&graph.type_of(v)) {
                *slot = Some(prepare_node(&graph, &catalog, &features, v, cfg, seed)?);
            }
        }
        Ok(Self {
            graph,
            catalog,
            features,
            inputs,
        })
    }

    pub fn inputs(&self, v: usize) -> Result<&NodeInputs> {
        self.inputs
            .get(v)
            .and_then(Option::as_ref)
            .ok_or_else(|| CgflError::invalid(format!("node {v} has no prepared inputs")))
    }
}

/// Match, build views and pool features for a single node.
pub fn prepare_node(
    g: &HetGraph,
    catalog: &PatternCatalog,
    features: &[Vec<f64>],
    v: usize,
    cfg: &EncoderConfig,
    seed: u64,
) -> Result<NodeInputs> {
    let groups = match_instances(g, v, catalog, cfg.instance_cap, seed);
    let view_seed = derive_seed(seed, "views", v as u64);
    let views = build_views(&groups, catalog, g.type_of(v), cfg.n_mean, view_seed);
    NodeInputs::from_groups(features, v, &groups, views)
}
