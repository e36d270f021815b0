//! Planted-community heterogeneous graphs.
//!
//! Three node types: `member` (labelled), `hub` and optional `item`. Every
//! member attaches to one hub of its community (the affiliation relation);
//! members also connect to each other (interaction) and to items. Labels are
//! the member's community, re-drawn uniformly with probability
//! `label_noise`; `label_noise = 1` gives labels independent of structure.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{HetGraph, HetGraphBuilder, Role};
use crate::error::{CgflError, Result};
use crate::seed::rng_for;

/// Degree ratio separating affiliation from interaction relations.
const AFFILIATION_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub name: String,
    #[serde(default = "default_role")]
    pub role: Role,
    /// Prepended to every node type, edge type and class name so that
    /// graphs generated from different specs have disjoint heterogeneities.
    pub type_prefix: String,
    pub communities: usize,
    pub members_per_community: usize,
    #[serde(default = "one")]
    pub hubs_per_community: usize,
    #[serde(default)]
    pub items: usize,
    #[serde(default)]
    pub item_degree: usize,
    pub intra_density: f64,
    #[serde(default)]
    pub inter_density: f64,
    pub member_dim: usize,
    pub hub_dim: usize,
    #[serde(default = "one")]
    pub item_dim: usize,
    #[serde(default = "one_f")]
    pub feature_signal: f64,
    #[serde(default = "one_f")]
    pub feature_noise: f64,
    #[serde(default)]
    pub label_noise: f64,
    pub seed: u64,
}

fn default_role() -> Role {
    Role::Source
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn members(&self) -> usize {
        self.communities * self.members_per_community
    }

    pub fn member_type(&self) -> String {
        format!("{}member", self.type_prefix)
    }

    pub fn hub_type(&self) -> String {
        format!("{}hub", self.type_prefix)
    }

    pub fn item_type(&self) -> String {
        format!("{}item", self.type_prefix)
    }

    /// Expected average degrees of (member, hub, item).
    pub fn expected_degrees(&self) -> (f64, f64, f64) {
        let m = self.members() as f64;
        let mpc = self.members_per_community as f64;
        let member = 1.0
            + self.intra_density * (mpc - 1.0)
            + self.inter_density * (m - mpc)
            + (self.items * self.item_degree) as f64 / m;
        let hub = mpc / self.hubs_per_community as f64;
        (member, hub, self.item_degree as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CgflError::Spec(format!("`{}`: {m}", self.name)));
        if self.communities < 1 || self.members_per_community < 2 {
            return bad("need at least one community with two members".into());
        }
        if self.hubs_per_community < 1 || self.hubs_per_community > self.members_per_community {
            return bad("hubs_per_community must be in 1..=members_per_community".into());
        }
        for (n, p) in [
            ("intra_density", self.intra_density),
            ("inter_density", self.inter_density),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{n} = {p} is not a probability"));
            }
        }
        if self.feature_noise < 0.0 || self.feature_signal < 0.0 {
            return bad("feature scales must be non-negative".into());
        }
        if self.items > 0 && (self.item_degree == 0 || self.item_degree > self.members()) {
            return bad("item_degree must be in 1..=members when items are present".into());
        }
        let (dm, dh, di) = self.expected_degrees();
        if dh / dm < AFFILIATION_RATIO {
            return bad(format!(
                "densities force member/hub degree ratio {:.2} below {AFFILIATION_RATIO}",
                dh / dm
            ));
        }
        let member_member = self.intra_density > 0.0 || self.inter_density > 0.0;
        let member_item = self.items > 0 && dm.max(di) / dm.min(di) < AFFILIATION_RATIO;
        if !member_member && !member_item {
            return bad("no interaction relation is realisable".into());
        }
        Ok(())
    }
}

/// Builds a graph from `spec`; fully determined by `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HetGraph> {
    spec.validate()?;
    let p = &spec.type_prefix;
    let classes: Vec<String> = (0..spec.communities).map(|c| format!("{p}class{c}")).collect();
    let member_t = spec.member_type();
    let hub_t = spec.hub_type();
    let item_t = spec.item_type();
    let e_aff = format!("{p}member-hub");
    let e_int = format!("{p}member-member");
    let e_item = format!("{p}member-item");

    let mut rng = rng_for(spec.seed, "synthetic", 0);
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);

    let centroids: Vec<Vec<f64>> = (0..spec.communities)
        .map(|_| (0..spec.member_dim).map(|_| gauss(&mut rng)).collect())
        .collect();

    let mut b = HetGraphBuilder::new(&spec.name, spec.role, classes.clone());
    let n = spec.members();
    let mut community = Vec::with_capacity(n);
    for i in 0..n {
        let c = i / spec.members_per_community;
        community.push(c);
        let label = if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
            rng.random_range(0..spec.communities)
        } else {
            c
        };
        let feats: Vec<f64> = centroids[c]
            .iter()
            .map(|&mu| spec.feature_signal * mu + spec.feature_noise * gauss(&mut rng))
            .collect();
        b.add_node(&format!("{p}m{i}"), &member_t, feats, Some(&classes[label]))?;
    }
    for c in 0..spec.communities {
        for h in 0..spec.hubs_per_community {
            let feats = (0..spec.hub_dim).map(|_| gauss(&mut rng)).collect();
            b.add_node(&format!("{p}h{c}_{h}"), &hub_t, feats, None)?;
        }
    }
    for k in 0..spec.items {
        let feats = (0..spec.item_dim).map(|_| gauss(&mut rng)).collect();
        b.add_node(&format!("{p}i{k}"), &item_t, feats, None)?;
    }

    for i in 0..n {
        let c = community[i];
        let h = (i % spec.members_per_community) % spec.hubs_per_community;
        b.add_edge(&format!("{p}m{i}"), &format!("{p}h{c}_{h}"), &e_aff)?;
    }
    for i in 0..n {
        for j in i + 1..n {
            let prob = if community[i] == community[j] {
                spec.intra_density
            } else {
                spec.inter_density
            };
            if prob > 0.0 && rng.random::<f64>() < prob {
                b.add_edge(&format!("{p}m{i}"), &format!("{p}m{j}"), &e_int)?;
            }
        }
    }
    for k in 0..spec.items {
        for m in sample(&mut rng, n, spec.item_degree) {
            b.add_edge(&format!("{p}m{m}"), &format!("{p}i{k}"), &e_item)?;
        }
    }
    let g = b.build()?;

    let dm = g.average_degree(&member_t)?;
    let dh = g.average_degree(&hub_t)?;
    if dh / dm < AFFILIATION_RATIO {
        return Err(CgflError::Spec(format!(
            "`{}`: realised member/hub degree ratio {:.2} is below {AFFILIATION_RATIO} for seed {}",
            spec.name,
            dh / dm,
            spec.seed
        )));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            name: "s".into(),
            role: Role::Source,
            type_prefix: "s:".into(),
            communities: 2,
            members_per_community: 20,
            hubs_per_community: 1,
            items: 0,
            item_degree: 0,
            intra_density: 0.03,
            inter_density: 0.0,
            member_dim: 4,
            hub_dim: 3,
            item_dim: 1,
            feature_signal: 1.0,
            feature_noise: 0.5,
            label_noise: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn affiliation_ratio_holds() {
        let spec = small_spec();
        let g = generate_synthetic(&spec).unwrap();
        let dm = g.average_degree(&spec.member_type()).unwrap();
        let dh = g.average_degree(&spec.hub_type()).unwrap();
        assert_eq!(dh, 20.0);
        assert!(dh / dm >= 10.0, "ratio {}", dh / dm);
        assert_eq!(g.nodes_of_type(g.type_id(&spec.hub_type()).unwrap()).len(), 2);
    }

    #[test]
    fn zero_noise_labels_follow_communities() {
        let spec = small_spec();
        let g = generate_synthetic(&spec).unwrap();
        for v in g.nodes_of_type(g.type_id(&spec.member_type()).unwrap()) {
            let id = &g.node(v).original_id;
            let idx: usize = id.trim_start_matches("s:m").parse().unwrap();
            assert_eq!(g.label(v), Some(idx / spec.members_per_community));
        }
    }

    #[test]
    fn same_seed_same_edges() {
        let spec = small_spec();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.edges(), b.edges());
        let mut other = spec.clone();
        other.seed = 6;
        let c = generate_synthetic(&other).unwrap();
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn dense_interaction_is_unsatisfiable() {
        let mut spec = small_spec();
        spec.intra_density = 0.5;
        assert!(matches!(generate_synthetic(&spec), Err(CgflError::Spec(_))));
    }

    #[test]
    fn needs_an_interaction_relation() {
        let mut spec = small_spec();
        spec.intra_density = 0.0;
        assert!(generate_synthetic(&spec).is_err());
    }
}
