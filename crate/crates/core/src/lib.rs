//! Cross-heterogeneity graph few-shot learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense tensors, a reverse-mode tape, Adam and a
//!   finite-difference gradient checker.
//! - [`hetgraph`]: the heterogeneous graph model, TSV ingestion, feature
//!   projection into a shared space and the synthetic benchmark generator.
//! - [`metapattern`]: random-walk pattern mining, affiliation/interaction
//!   categorisation and per-node instance matching.
//! - [`encoder`]: the multi-view attention encoder (instance, category and
//!   view attention).
//! - [`scoring`]: graph-, task- and node-level score heads.
//! - [`metalearn`]: episodic task sampling, score-weighted prototypical
//!   training and training-free evaluation on the target graph.

pub mod encoder;
pub mod error;
pub mod hetgraph;
pub mod metalearn;
pub mod metapattern;
pub mod numerics;
pub mod scoring;
pub mod seed;

pub use error::{CgflError, Result};
pub use hetgraph::{FeatureProjector, HetGraph, Role, SyntheticSpec};
pub use metapattern::{Category, MetaPattern, MinerConfig, PatternCatalog, PatternInstance};
pub use numerics::{Adam, ParamId, ParamStore, Tape, Tensor, Var};
