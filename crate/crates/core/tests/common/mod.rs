#![allow(dead_code)]

use cgfl_core::hetgraph::{HetGraph, HetGraphBuilder};
use cgfl_core::Role;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TYPES: [&str; 3] = ["A", "B", "C"];

/// Random typed graph; edges drawn independently with probability `p`.
/// Node `i` gets type `TYPES[i % types]` so every type is present.
pub fn random_graph(n: usize, types: usize, p: f64, seed: u64) -> HetGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = HetGraphBuilder::new(format!("r{seed}"), Role::Source, vec![]);
    let ty = |i: usize| TYPES[i % types];
    for i in 0..n {
        b.add_node(&format!("v{i}"), ty(i), vec![], None).unwrap();
    }
    let mut any = false;
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                let (a, c) = if ty(i) <= ty(j) { (ty(i), ty(j)) } else { (ty(j), ty(i)) };
                b.add_edge(&format!("v{i}"), &format!("v{j}"), &format!("{a}-{c}")).unwrap();
                any = true;
            }
        }
    }
    if !any {
        b.add_edge("v0", "v1", "A-B").unwrap();
    }
    b.build().unwrap()
}

use cgfl_core::encoder::{EncoderConfig, PreparedGraph};
use cgfl_core::hetgraph::FeatureProjector;
use cgfl_core::metapattern::{mine_catalog, Category, MinerConfig};

pub fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        d_in: 4,
        d_head: 2,
        k_att: 2,
        d_att: 3,
        n_mean: 1,
        instance_cap: 3,
        ..Default::default()
    }
}

/// Ten nodes: eight labelled members in two classes, one hub shared by six
/// members and one item shared by four. Hub patterns are affiliations,
/// item patterns interactions.
pub fn ten_node_graph() -> HetGraph {
    let classes = vec!["c0".to_string(), "c1".to_string()];
    let mut b = HetGraphBuilder::new("tiny", Role::Source, classes.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..8 {
        let f: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0) + (i / 4) as f64).collect();
        b.add_node(&format!("m{i}"), "member", f, Some(&classes[i / 4])).unwrap();
    }
    b.add_node("h", "hub", vec![0.5, -0.2], None).unwrap();
    b.add_node("it", "item", vec![0.1, 0.9], None).unwrap();
    for i in 0..6 {
        b.add_edge(&format!("m{i}"), "h", "member-hub").unwrap();
    }
    for i in [0, 3, 5, 7] {
        b.add_edge(&format!("m{i}"), "it", "member-item").unwrap();
    }
    for (a, c) in [(6, 7), (1, 2), (4, 6)] {
        b.add_edge(&format!("m{a}"), &format!("m{c}"), "member-member").unwrap();
    }
    b.build().unwrap()
}

/// Miner settings that split the tiny graph's patterns across categories.
pub fn tiny_miner() -> MinerConfig {
    MinerConfig {
        n_path: 30,
        walk_length: 20,
        theta_mp: 3.0,
        theta_lp: 2,
        seed: 4,
        ..Default::default()
    }
}

pub fn prepare(g: HetGraph, miner: &MinerConfig, enc: &EncoderConfig, seed: u64) -> PreparedGraph {
    let catalog = mine_catalog(&g, miner).unwrap();
    let x = FeatureProjector::new(enc.d_in, 9).covering(&g).prepare(&g).unwrap();
    PreparedGraph::new(g, catalog, x, enc, seed).unwrap()
}

pub fn categories_present(p: &PreparedGraph) -> Vec<Category> {
    let mut out: Vec<Category> = p.catalog.patterns.iter().filter_map(|m| m.category).collect();
    out.sort();
    out.dedup();
    out
}

use cgfl_core::hetgraph::generate_synthetic;
use cgfl_core::metalearn::TrainConfig;
use cgfl_core::SyntheticSpec;

pub fn small_spec(name: &str, prefix: &str, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        name: name.into(),
        role: Role::Source,
        type_prefix: prefix.into(),
        communities: 2,
        members_per_community: 30,
        hubs_per_community: 1,
        items: 6,
        item_degree: 3,
        intra_density: 0.03,
        inter_density: 0.0,
        member_dim: 4,
        hub_dim: 3,
        item_dim: 2,
        feature_signal: 1.0,
        feature_noise: 1.0,
        label_noise: 0.0,
        seed,
    }
}

pub fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        d_in: 8,
        d_head: 4,
        k_att: 2,
        d_att: 6,
        n_mean: 2,
        instance_cap: 4,
        ..Default::default()
    }
}

/// Two sources and one target with disjoint type names.
pub fn small_problem(enc: &EncoderConfig) -> (Vec<PreparedGraph>, PreparedGraph) {
    let miner = MinerConfig {
        seed: 1,
        ..Default::default()
    };
    let make = |name: &str, prefix: &str, role: Role, seed: u64| {
        let mut spec = small_spec(name, prefix, seed);
        spec.role = role;
        let g = generate_synthetic(&spec).unwrap();
        prepare(g, &miner, enc, seed)
    };
    let sources = vec![
        make("a", "a:", Role::Source, 1),
        make("b", "b:", Role::Source, 2),
    ];
    let target = make("t", "t:", Role::Target, 3);
    (sources, target)
}

pub fn small_train() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        tasks_per_graph: 6,
        test_tasks: 20,
        ..Default::default()
    }
}
