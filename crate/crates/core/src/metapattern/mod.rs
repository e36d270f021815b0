//! Meta-pattern mining.
//!
//! A meta-pattern is a sequence of node types whose two endpoints share a
//! focal type. Patterns are mined from uniform random walks, kept per focal
//! type by frequency, and split into four categories by the degree ratios
//! of their consecutive type pairs (affiliation vs interaction) and by
//! symmetry or length.

mod categorize;
mod matching;
mod subpaths;
mod walks;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CgflError, Result};
use crate::hetgraph::HetGraph;

pub use categorize::{
    categorize, classify, dispersion_from_degrees, pattern_dispersion, ratio_from_degrees,
    relation_ratio,
};
pub use matching::{match_instances, InstanceGroups, MAX_EXPANSIONS};
pub use subpaths::{extract_subpaths, select_meta_patterns, SubpathGroups};
pub use walks::{sample_walks, WalkSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Sap,
    Wap,
    Sip,
    Wip,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Sap, Category::Wap, Category::Sip, Category::Wip];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Sap => "SAP",
            Category::Wap => "WAP",
            Category::Sip => "SIP",
            Category::Wip => "WIP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lexicographic minimum of a type sequence and its reversal.
pub fn canonical(types: &[usize]) -> Vec<usize> {
    let rev: Vec<usize> = types.iter().rev().copied().collect();
    if rev.as_slice() < types {
        rev
    } else {
        types.to_vec()
    }
}

pub fn is_palindrome(types: &[usize]) -> bool {
    types.iter().eq(types.iter().rev())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaPattern {
    /// Canonical node-type sequence.
    pub types: Vec<usize>,
    /// Occurrences among the sampled walks.
    pub count: usize,
    /// Maximum degree ratio over consecutive type pairs; `+inf` when a
    /// type has zero average degree. Set by [`categorize`].
    pub dispersion: Option<f64>,
    pub category: Option<Category>,
}

impl MetaPattern {
    pub fn new(types: Vec<usize>, count: usize) -> Self {
        debug_assert!(types.len() >= 3 && types[0] == types[types.len() - 1]);
        Self {
            types: canonical(&types),
            count,
            dispersion: None,
            category: None,
        }
    }

    pub fn focal(&self) -> usize {
        self.types[0]
    }

    pub fn edge_len(&self) -> usize {
        self.types.len() - 1
    }
}

/// Concrete node path matching a pattern, oriented to start at its anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternInstance {
    pub nodes: Vec<usize>,
    /// Index of the pattern in its [`PatternCatalog`].
    pub pattern: usize,
}

impl PatternInstance {
    pub fn anchor(&self) -> usize {
        self.nodes[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    #[serde(default = "d_n_path")]
    pub n_path: usize,
    #[serde(default = "d_walk_length")]
    pub walk_length: usize,
    #[serde(default = "d_k_mp")]
    pub k_mp: usize,
    #[serde(default = "d_max_sub")]
    pub max_subpath_edges: usize,
    #[serde(default = "d_theta_mp")]
    pub theta_mp: f64,
    #[serde(default = "d_theta_lp")]
    pub theta_lp: usize,
    #[serde(default)]
    pub seed: u64,
}

fn d_n_path() -> usize {
    20
}
fn d_walk_length() -> usize {
    40
}
fn d_k_mp() -> usize {
    10
}
fn d_max_sub() -> usize {
    4
}
fn d_theta_mp() -> f64 {
    10.0
}
fn d_theta_lp() -> usize {
    3
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            n_path: d_n_path(),
            walk_length: d_walk_length(),
            k_mp: d_k_mp(),
            max_subpath_edges: d_max_sub(),
            theta_mp: d_theta_mp(),
            theta_lp: d_theta_lp(),
            seed: 0,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(CgflError::Config(format!("miner: {m}")));
        if self.n_path < 1 {
            return fail("n_path must be >= 1");
        }
        if self.walk_length < 2 {
            return fail("walk_length must be >= 2");
        }
        if self.k_mp < 1 {
            return fail("k_mp must be >= 1");
        }
        if self.max_subpath_edges < 2 {
            return fail("max_subpath_edges must be >= 2");
        }
        if !(self.theta_mp > 1.0) {
            return fail("theta_mp must be > 1");
        }
        if self.theta_lp < 2 {
            return fail("theta_lp must be >= 2");
        }
        Ok(())
    }
}

/// Categorised meta-patterns of one graph, grouped by focal type and ordered
/// by descending count within each group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternCatalog {
    pub patterns: Vec<MetaPattern>,
}

impl PatternCatalog {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, i: usize) -> &MetaPattern {
        &self.patterns[i]
    }

    /// Indices of patterns whose focal type is `focal`.
    pub fn for_focal(&self, focal: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.patterns.len()).filter(move |&i| self.patterns[i].focal() == focal)
    }

    pub fn category(&self, i: usize) -> Category {
        self.patterns[i]
            .category
            .expect("catalog must be categorised before use")
    }

    /// Pattern with the highest count among those with the given focal type
    /// and category; ties go to the lexicographically smaller sequence.
    pub fn max_pattern(&self, focal: usize, category: Category) -> Option<usize> {
        self.for_focal(focal)
            .filter(|&i| self.patterns[i].category == Some(category))
            .min_by(|&a, &b| {
                let (pa, pb) = (&self.patterns[a], &self.patterns[b]);
                pb.count.cmp(&pa.count).then_with(|| pa.types.cmp(&pb.types))
            })
    }

    pub fn export(&self, g: &HetGraph) -> Vec<CatalogEntry> {
        self.patterns
            .iter()
            .map(|p| CatalogEntry {
                focal: g.type_name(p.focal()).to_string(),
                sequence: p.types.iter().map(|&t| g.type_name(t).to_string()).collect(),
                count: p.count,
                dispersion: p.dispersion.filter(|d| d.is_finite()),
                category: p.category,
            })
            .collect()
    }
}

/// JSON row of an exported catalog. An infinite dispersion (degenerate
/// degree) is written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub focal: String,
    pub sequence: Vec<String>,
    pub count: usize,
    pub dispersion: Option<f64>,
    pub category: Option<Category>,
}

/// Full mining pipeline: walks, per-focal grouping and top-K selection,
/// then categorisation.
pub fn mine_catalog(g: &HetGraph, cfg: &MinerConfig) -> Result<PatternCatalog> {
    cfg.validate()?;
    let walks = sample_walks(g, cfg);
    let mut catalog = PatternCatalog::default();
    for focal in 0..g.node_types().len() {
        let groups = extract_subpaths(g, &walks, focal, cfg.max_subpath_edges);
        catalog
            .patterns
            .extend(select_meta_patterns(&groups, cfg.k_mp));
    }
    categorize(&mut catalog, g, cfg);
    Ok(catalog)
}
