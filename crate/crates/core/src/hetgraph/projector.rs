use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::HetGraph;
use crate::error::{CgflError, Result};
use crate::seed::rng_for;

pub const DEFAULT_D_IN: usize = 64;

/// Fixed random projections from each node type's raw feature space into a
/// shared `d_in`-dimensional space. Each matrix is a pure function of
/// `(seed, type name, raw_dim)` and has unit-norm columns.
#[derive(Debug, Clone)]
pub struct FeatureProjector {
    d_in: usize,
    seed: u64,
    identity: bool,
    matrices: BTreeMap<String, (usize, Vec<f64>)>,
}

impl FeatureProjector {
    pub fn new(d_in: usize, seed: u64) -> Self {
        Self {
            d_in,
            seed,
            identity: false,
            matrices: BTreeMap::new(),
        }
    }

    /// Types whose raw dimension equals `d_in` get the identity matrix.
    pub fn identity_when_square(mut self) -> Self {
        self.identity = true;
        self
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Registers every node type of `g`.
    pub fn covering(mut self, g: &HetGraph) -> Self {
        for t in 0..g.node_types().len() {
            self.register(g.type_name(t), g.feature_dim(t));
        }
        self
    }

    pub fn register(&mut self, type_name: &str, raw_dim: usize) {
        let m = self.build_matrix(type_name, raw_dim);
        self.matrices.insert(type_name.to_string(), (raw_dim, m));
    }

    fn build_matrix(&self, type_name: &str, raw_dim: usize) -> Vec<f64> {
        let d = self.d_in;
        if self.identity && raw_dim == d {
            let mut m = vec![0.0; d * d];
            (0..d).for_each(|i| m[i * d + i] = 1.0);
            return m;
        }
        let mut rng = rng_for(self.seed, type_name, raw_dim as u64);
        let mut m: Vec<f64> = (0..raw_dim * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for j in 0..d {
            let norm = (0..raw_dim).map(|i| m[i * d + j].powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                (0..raw_dim).for_each(|i| m[i * d + j] /= norm);
            }
        }
        m
    }

    pub fn matrix(&self, type_name: &str) -> Option<(usize, &[f64])> {
        self.matrices.get(type_name).map(|(r, m)| (*r, m.as_slice()))
    }

    fn project_one(&self, raw: &[f64], m: &[f64]) -> Vec<f64> {
        let d = self.d_in;
        let mut out = vec![0.0; d];
        for (i, &x) in raw.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(&m[i * d..(i + 1) * d]) {
                *o += x * w;
            }
        }
        out
    }

    fn project_rows(&self, g: &HetGraph, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(g.num_nodes());
        for (v, raw) in rows.iter().enumerate() {
            let ty = g.type_name(g.type_of(v));
            let (raw_dim, m) = self.matrix(ty).ok_or_else(|| {
                CgflError::invalid(format!("projector has no matrix for node type `{ty}`"))
            })?;
            if raw_dim != raw.len() {
                return Err(CgflError::invalid(format!(
                    "projector for `{ty}` expects raw dimension {raw_dim}, node has {}",
                    raw.len()
                )));
            }
            out.push(self.project_one(raw, m));
        }
        Ok(out)
    }

    /// Projects raw features as stored in the graph.
    pub fn project(&self, g: &HetGraph) -> Result<Vec<Vec<f64>>> {
        let raw: Vec<Vec<f64>> = g.nodes().iter().map(|n| n.features.clone()).collect();
        self.project_rows(g, &raw)
    }

    /// Per-type z-scoring followed by projection; the input space used by
    /// the encoder and the node-score head.
    pub fn prepare(&self, g: &HetGraph) -> Result<Vec<Vec<f64>>> {
        self.project_rows(g, &zscore_by_type(g))
    }
}

/// Standardises every feature column within each node type. Constant
/// columns are centred only.
pub fn zscore_by_type(g: &HetGraph) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = g.nodes().iter().map(|n| n.features.clone()).collect();
    for t in 0..g.node_types().len() {
        let members = g.nodes_of_type(t);
        let dim = g.feature_dim(t);
        if members.is_empty() || dim == 0 {
            continue;
        }
        let n = members.len() as f64;
        for j in 0..dim {
            let mean = members.iter().map(|&v| out[v][j]).sum::<f64>() / n;
            let var = members.iter().map(|&v| (out[v][j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for &v in &members {
                let centred = out[v][j] - mean;
                out[v][j] = if sd > 1e-12 { centred / sd } else { centred };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{HetGraphBuilder, Role};

    fn toy(dim: usize, zero: bool) -> HetGraph {
        let mut b = HetGraphBuilder::new("toy", Role::Source, vec![]);
        let f = |k: usize| -> Vec<f64> {
            (0..dim)
                .map(|i| if zero { 0.0 } else { (i + k) as f64 * 0.1 - 0.3 })
                .collect()
        };
        b.add_node("a", "A", f(0), None).unwrap();
        b.add_node("b", "B", vec![1.0, 2.0], None).unwrap();
        b.add_node("c", "A", f(1), None).unwrap();
        b.add_edge("a", "b", "A-B").unwrap();
        b.add_edge("c", "b", "A-B").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn identity_mode_returns_raw() {
        let g = toy(8, false);
        let p = FeatureProjector::new(8, 3).identity_when_square().covering(&g);
        let x = p.project(&g).unwrap();
        assert_eq!(x[0], g.node(0).features);
    }

    #[test]
    fn deterministic_and_unit_columns() {
        let g = toy(5, false);
        let a = FeatureProjector::new(16, 11).covering(&g).project(&g).unwrap();
        let b = FeatureProjector::new(16, 11).covering(&g).project(&g).unwrap();
        assert_eq!(a, b);
        let p = FeatureProjector::new(16, 11).covering(&g);
        let (r, m) = p.matrix("A").unwrap();
        for j in 0..16 {
            let n: f64 = (0..r).map(|i| m[i * 16 + j].powi(2)).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_features_project_to_zero() {
        let g = toy(4, true);
        let x = FeatureProjector::new(8, 1).covering(&g).project(&g).unwrap();
        assert!(x[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_type_is_an_error() {
        let g = toy(4, false);
        let mut p = FeatureProjector::new(8, 1);
        p.register("A", 4);
        assert!(p.project(&g).is_err());
    }
}
