//! Experiment configuration.
//!
//! One TOML file describes a whole experiment:
//!
//! ```toml
//! name = "benchmark"
//! seeds = [0, 1, 2]
//!
//! [[sources]]
//! manifest = "data/acm.toml"          # TSV graph on disk
//!
//! [[sources]]
//! [sources.synthetic]                 # or a generated graph
//! name = "a"
//! type_prefix = "a:"
//! # ...
//!
//! [target]
//! manifest = "data/dblp.toml"
//!
//! [miner]      # optional, see MinerConfig
//! [encoder]    # optional, see EncoderConfig
//! [training]   # optional, see TrainConfig
//! [sweep]      # only read by `cgfl sweep`
//! param = "theta_lp"
//! values = [2, 3, 4]
//! ```
//!
//! Manifest paths are relative to the config file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cgfl_core::encoder::EncoderConfig;
use cgfl_core::metalearn::TrainConfig;
use cgfl_core::{MinerConfig, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

impl GraphSource {
    pub fn name(&self) -> String {
        match self {
            GraphSource::Manifest(p) => p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
            GraphSource::Synthetic(s) => s.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    ThetaMp,
    ThetaLp,
    KMp,
    NMean,
    KAtt,
    /// Embedding width; `d_head` is set to `d / k_att`.
    D,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::ThetaMp,
        SweepParam::ThetaLp,
        SweepParam::KMp,
        SweepParam::NMean,
        SweepParam::KAtt,
        SweepParam::D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ThetaMp => "theta_mp",
            SweepParam::ThetaLp => "theta_lp",
            SweepParam::KMp => "k_mp",
            SweepParam::NMean => "n_mean",
            SweepParam::KAtt => "k_att",
            SweepParam::D => "d",
        }
    }

    /// Returns a copy of `cfg` with the parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        if self == SweepParam::ThetaMp {
            out.miner.theta_mp = value;
            return Ok(out);
        }
        if value.fract() != 0.0 || value < 0.0 {
            return Err(HarnessError::Config(format!(
                "{} takes non-negative integers, got {value}",
                self.name()
            )));
        }
        let n = value as usize;
        match self {
            SweepParam::ThetaMp => unreachable!(),
            SweepParam::ThetaLp => out.miner.theta_lp = n,
            SweepParam::KMp => out.miner.k_mp = n,
            SweepParam::NMean => out.encoder.n_mean = n,
            SweepParam::KAtt => {
                // keep d fixed when the head count changes
                let d = cfg.encoder.d();
                if n == 0 || !d.is_multiple_of(n) {
                    return Err(HarnessError::Config(format!(
                        "k_att = {n} does not divide d = {d}"
                    )));
                }
                out.encoder.k_att = n;
                out.encoder.d_head = d / n;
            }
            SweepParam::D => {
                let k = cfg.encoder.k_att;
                if n == 0 || !n.is_multiple_of(k) {
                    return Err(HarnessError::Config(format!(
                        "d = {n} is not a positive multiple of k_att = {k}"
                    )));
                }
                out.encoder.d_head = n / k;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
                HarnessError::Config(format!("unknown sweep parameter `{s}`; expected one of {known:?}"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output root; the run goes to `<out_dir>/<name>`.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Require every source to share no node or edge type with the target.
    #[serde(default = "yes")]
    pub cross_heterogeneity: bool,
    #[serde(default = "default_projector_seed")]
    pub projector_seed: u64,
    pub sources: Vec<GraphSource>,
    pub target: GraphSource,
    #[serde(default)]
    pub miner: MinerConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Directory manifest paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn yes() -> bool {
    true
}
fn default_projector_seed() -> u64 {
    3
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn graph_sources(&self) -> impl Iterator<Item = &GraphSource> {
        self.sources.iter().chain(std::iter::once(&self.target))
    }

    /// Checks everything that can be checked without building graphs.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return fail(format!("experiment name `{}` is not a valid directory name", self.name));
        }
        if self.sources.is_empty() {
            return fail("at least one source graph is required".into());
        }
        if self.seeds.is_empty() {
            return fail("the seed list is empty".into());
        }
        let core = |r: cgfl_core::Result<()>| r.map_err(|e| HarnessError::Config(e.to_string()));
        core(self.miner.validate())?;
        core(self.encoder.validate())?;
        core(self.training.validate())?;
        let mut names = Vec::new();
        for g in self.graph_sources() {
            match g {
                GraphSource::Manifest(p) => {
                    let full = self.resolve(p);
                    if !full.is_file() {
                        return fail(format!("manifest {} does not exist", full.display()));
                    }
                }
                GraphSource::Synthetic(spec) => {
                    spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
                }
            }
            let name = g.name();
            if names.contains(&name) {
                return fail(format!("graph name `{name}` is used twice"));
            }
            names.push(name);
        }
        if let Some(sweep) = &self.sweep {
            let param: SweepParam = sweep.param.parse()?;
            if sweep.values.is_empty() {
                return fail("sweep has no values".into());
            }
            for &v in &sweep.values {
                param.apply(self, v)?.validate_models()?;
            }
        }
        Ok(())
    }

    /// The miner and encoder parts of [`ExperimentConfig::validate`].
    fn validate_models(&self) -> Result<()> {
        let core = |r: cgfl_core::Result<()>| r.map_err(|e| HarnessError::Config(e.to_string()));
        core(self.miner.validate())?;
        core(self.encoder.validate())
    }

    /// Output root: explicit override, then `CGFL_OUT`, then the config's
    /// `out_dir`, then `runs`.
    pub fn output_root(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        if let Some(env) = std::env::var_os("CGFL_OUT").filter(|v| !v.is_empty()) {
            return PathBuf::from(env);
        }
        match &self.out_dir {
            Some(p) => self.resolve(p),
            None => PathBuf::from("runs"),
        }
    }

    pub fn run_dir(&self, explicit: Option<&Path>) -> PathBuf {
        self.output_root(explicit).join(&self.name)
    }
}
