//! TSV ingestion and export.
//!
//! ```text
//! nodes:  node_id<TAB>node_type<TAB>label<TAB>f1,f2,...
//! edges:  src_id<TAB>dst_id<TAB>edge_type
//! ```
//!
//! Both files start with a header row. The manifest is TOML and points at
//! the two files relative to its own directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HetGraph, HetGraphBuilder, Role};
use crate::error::{CgflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub name: String,
    pub role: Role,
    pub nodes: PathBuf,
    pub edges: PathBuf,
    #[serde(default)]
    pub classes: Vec<String>,
}

impl GraphManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CgflError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CgflError::Ingestion {
            file: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(&text, s.start)),
            message: e.message().to_string(),
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn ingest(file: &Path, line: usize, message: impl Into<String>) -> CgflError {
    CgflError::Ingestion {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_features(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad feature value `{f}`: {e}"))
        })
        .collect()
}

/// Reads and validates a graph from its manifest.
pub fn load_graph(manifest_path: &Path) -> Result<HetGraph> {
    let manifest = GraphManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let nodes_path = base.join(&manifest.nodes);
    let edges_path = base.join(&manifest.edges);
    let mut builder = HetGraphBuilder::new(&manifest.name, manifest.role, manifest.classes.clone());

    let nodes_text = fs::read_to_string(&nodes_path).map_err(|e| CgflError::io(&nodes_path, e))?;
    for (i, raw) in nodes_text.lines().enumerate().skip(1) {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(ingest(
                &nodes_path,
                line,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let features = parse_features(cols[3]).map_err(|m| ingest(&nodes_path, line, m))?;
        let label = (!cols[2].is_empty()).then_some(cols[2]);
        builder
            .add_node(cols[0], cols[1], features, label)
            .map_err(|e| ingest(&nodes_path, line, e.to_string()))?;
    }

    let edges_text = fs::read_to_string(&edges_path).map_err(|e| CgflError::io(&edges_path, e))?;
    for (i, raw) in edges_text.lines().enumerate().skip(1) {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 3 {
            return Err(ingest(
                &edges_path,
                line,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        builder
            .add_edge(cols[0], cols[1], cols[2])
            .map_err(|e| ingest(&edges_path, line, e.to_string()))?;
    }
    builder
        .build()
        .map_err(|e| ingest(manifest_path, 0, e.to_string()))
}

/// Writes `<name>.nodes.tsv`, `<name>.edges.tsv` and `<name>.toml` into
/// `dir` and returns the manifest path.
pub fn save_graph(g: &HetGraph, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CgflError::io(dir, e))?;
    let nodes_file = format!("{}.nodes.tsv", g.name());
    let edges_file = format!("{}.edges.tsv", g.name());

    let mut nodes = String::from("node_id\tnode_type\tlabel\tfeatures\n");
    for n in g.nodes() {
        let label = n.label.map_or("", |c| g.classes()[c].as_str());
        let feats: Vec<String> = n.features.iter().map(|f| format!("{f:?}")).collect();
        let _ = writeln!(
            nodes,
            "{}\t{}\t{}\t{}",
            n.original_id,
            g.type_name(n.type_id),
            label,
            feats.join(",")
        );
    }
    let mut edges = String::from("src_id\tdst_id\tedge_type\n");
    for e in g.edges() {
        let _ = writeln!(
            edges,
            "{}\t{}\t{}",
            g.node(e.src).original_id,
            g.node(e.dst).original_id,
            g.edge_types()[e.type_id]
        );
    }
    let manifest = GraphManifest {
        name: g.name().to_string(),
        role: g.role(),
        nodes: PathBuf::from(&nodes_file),
        edges: PathBuf::from(&edges_file),
        classes: g.classes().to_vec(),
    };
    let manifest_path = dir.join(format!("{}.toml", g.name()));
    let write = |p: PathBuf, s: String| fs::write(&p, s).map_err(|e| CgflError::io(p, e));
    write(dir.join(&nodes_file), nodes)?;
    write(dir.join(&edges_file), edges)?;
    write(
        manifest_path.clone(),
        toml::to_string(&manifest).map_err(|e| CgflError::Config(e.to_string()))?,
    )?;
    Ok(manifest_path)
}
