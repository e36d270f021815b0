//! Heterogeneous graph model.
//!
//! Graphs are undirected for every downstream purpose (walks, degrees,
//! pattern matching). Node ids are dense `0..n` after construction; the ids
//! found in input files are kept as [`NodeRecord::original_id`].

mod io;
mod projector;
mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CgflError, Result};

pub use io::{load_graph, save_graph, GraphManifest};
pub use projector::{zscore_by_type, FeatureProjector, DEFAULT_D_IN};
pub use synthetic::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Source => "source",
            Role::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub original_id: String,
    pub type_id: usize,
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub type_id: usize,
}

#[derive(Debug, Clone)]
pub struct HetGraph {
    name: String,
    role: Role,
    node_types: Vec<String>,
    edge_types: Vec<String>,
    classes: Vec<String>,
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl HetGraph {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[String] {
        &self.edge_types
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &NodeRecord {
        &self.nodes[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn type_of(&self, v: usize) -> usize {
        self.nodes[v].type_id
    }

    pub fn type_id(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn type_name(&self, type_id: usize) -> &str {
        &self.node_types[type_id]
    }

    /// Undirected neighbour list; parallel edges appear once per edge.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.nodes[v].label
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Labelled node ids grouped by class index.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes.len()];
        for (v, n) in self.nodes.iter().enumerate() {
            if let Some(c) = n.label {
                out[c].push(v);
            }
        }
        out
    }

    /// Node types that carry at least one label.
    pub fn labeled_types(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .nodes
            .iter()
            .filter(|n| n.label.is_some())
            .map(|n| n.type_id)
            .collect();
        set.into_iter().collect()
    }

    pub fn nodes_of_type(&self, type_id: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&v| self.nodes[v].type_id == type_id)
            .collect()
    }

    /// Raw feature dimension of a node type (0 when the type has no nodes).
    pub fn feature_dim(&self, type_id: usize) -> usize {
        self.nodes
            .iter()
            .find(|n| n.type_id == type_id)
            .map_or(0, |n| n.features.len())
    }

    /// Average degree of every node type, indexed by type id. Each edge
    /// counts toward both endpoints.
    pub fn type_average_degrees(&self) -> Vec<f64> {
        let k = self.node_types.len();
        let mut total = vec![0usize; k];
        let mut count = vec![0usize; k];
        for (v, n) in self.nodes.iter().enumerate() {
            total[n.type_id] += self.adjacency[v].len();
            count[n.type_id] += 1;
        }
        total
            .iter()
            .zip(&count)
            .map(|(&t, &c)| if c == 0 { 0.0 } else { t as f64 / c as f64 })
            .collect()
    }

    pub fn average_degree(&self, type_name: &str) -> Result<f64> {
        let t = self
            .type_id(type_name)
            .ok_or_else(|| CgflError::invalid(format!("unknown node type `{type_name}`")))?;
        Ok(self.type_average_degrees()[t])
    }
}

/// Checks that two graphs share no node types and no edge types.
pub fn check_disjoint_heterogeneity(a: &HetGraph, b: &HetGraph) -> Result<()> {
    let shared_nodes: Vec<&String> = a
        .node_types
        .iter()
        .filter(|t| b.node_types.contains(t))
        .collect();
    let shared_edges: Vec<&String> = a
        .edge_types
        .iter()
        .filter(|t| b.edge_types.contains(t))
        .collect();
    if shared_nodes.is_empty() && shared_edges.is_empty() {
        Ok(())
    } else {
        Err(CgflError::Config(format!(
            "graphs `{}` and `{}` are not cross-heterogeneous: shared node types {:?}, shared edge types {:?}",
            a.name, b.name, shared_nodes, shared_edges
        )))
    }
}

#[derive(Debug)]
struct PendingNode {
    original_id: String,
    type_name: String,
    features: Vec<f64>,
    label: Option<usize>,
}

/// Incremental, validating constructor for [`HetGraph`].
#[derive(Debug)]
pub struct HetGraphBuilder {
    name: String,
    role: Role,
    classes: Vec<String>,
    nodes: Vec<PendingNode>,
    index: HashMap<String, usize>,
    type_dims: HashMap<String, usize>,
    edges: Vec<(usize, usize, String)>,
}

impl HetGraphBuilder {
    pub fn new(name: impl Into<String>, role: Role, classes: Vec<String>) -> Self {
        Self {
            name: name.into(),
            role,
            classes,
            nodes: Vec::new(),
            index: HashMap::new(),
            type_dims: HashMap::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(
        &mut self,
        original_id: &str,
        type_name: &str,
        features: Vec<f64>,
        label: Option<&str>,
    ) -> Result<usize> {
        if self.index.contains_key(original_id) {
            return Err(CgflError::invalid(format!("duplicate node id `{original_id}`")));
        }
        if type_name.is_empty() {
            return Err(CgflError::invalid("empty node type"));
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(CgflError::invalid(format!(
                "node `{original_id}` has non-finite features"
            )));
        }
        match self.type_dims.get(type_name) {
            Some(&d) if d != features.len() => {
                return Err(CgflError::invalid(format!(
                    "ragged features: node `{original_id}` of type `{type_name}` has {} features, type has {d}",
                    features.len()
                )))
            }
            Some(_) => {}
            None => {
                self.type_dims.insert(type_name.to_string(), features.len());
            }
        }
        let label = match label {
            None => None,
            Some(l) => Some(self.classes.iter().position(|c| c == l).ok_or_else(|| {
                CgflError::invalid(format!(
                    "label `{l}` of node `{original_id}` is not in the declared class set"
                ))
            })?),
        };
        let id = self.nodes.len();
        self.index.insert(original_id.to_string(), id);
        self.nodes.push(PendingNode {
            original_id: original_id.to_string(),
            type_name: type_name.to_string(),
            features,
            label,
        });
        Ok(id)
    }

    pub fn add_edge(&mut self, src: &str, dst: &str, edge_type: &str) -> Result<()> {
        let s = *self
            .index
            .get(src)
            .ok_or_else(|| CgflError::invalid(format!("edge endpoint `{src}` does not exist")))?;
        let d = *self
            .index
            .get(dst)
            .ok_or_else(|| CgflError::invalid(format!("edge endpoint `{dst}` does not exist")))?;
        if s == d {
            return Err(CgflError::invalid(format!("self-loop on `{src}`")));
        }
        if edge_type.is_empty() {
            return Err(CgflError::invalid("empty edge type"));
        }
        self.edges.push((s, d, edge_type.to_string()));
        Ok(())
    }

    pub fn build(self) -> Result<HetGraph> {
        let node_types: Vec<String> = self
            .nodes
            .iter()
            .map(|n| n.type_name.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let edge_types: Vec<String> = self
            .edges
            .iter()
            .map(|e| e.2.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if node_types.len() + edge_types.len() <= 2 {
            return Err(CgflError::invalid(format!(
                "graph `{}` is not heterogeneous: {} node types + {} edge types must exceed 2",
                self.name,
                node_types.len(),
                edge_types.len()
            )));
        }
        let type_pos: HashMap<&str, usize> = node_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let edge_pos: HashMap<&str, usize> = edge_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let nodes: Vec<NodeRecord> = self
            .nodes
            .iter()
            .map(|n| NodeRecord {
                original_id: n.original_id.clone(),
                type_id: type_pos[n.type_name.as_str()],
                features: n.features.clone(),
                label: n.label,
            })
            .collect();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|(s, d, t)| Edge {
                src: *s,
                dst: *d,
                type_id: edge_pos[t.as_str()],
            })
            .collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.src].push(e.dst);
            adjacency[e.dst].push(e.src);
        }
        Ok(HetGraph {
            name: self.name,
            role: self.role,
            node_types,
            edge_types,
            classes: self.classes,
            nodes,
            edges,
            adjacency,
        })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Star with `leaves` leaves of type B around a centre of type A.
    pub fn star(leaves: usize) -> HetGraph {
        let mut b = HetGraphBuilder::new("star", Role::Source, vec![]);
        b.add_node("c", "A", vec![], None).unwrap();
        for i in 0..leaves {
            b.add_node(&format!("l{i}"), "B", vec![], None).unwrap();
            b.add_edge("c", &format!("l{i}"), "A-B").unwrap();
        }
        b.build().unwrap()
    }
}
