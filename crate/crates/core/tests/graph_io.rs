mod common;

use cgfl_core::hetgraph::{load_graph, save_graph, HetGraphBuilder};
use cgfl_core::{HetGraph, Role};
use proptest::prelude::*;

fn featured_graph(n: usize, edges: &[(usize, usize)], feats: &[f64], labels: &[bool]) -> HetGraph {
    let classes = vec!["x".to_string(), "y".to_string()];
    let mut b = HetGraphBuilder::new("rt", Role::Target, classes.clone());
    for i in 0..n {
        let (ty, f) = if i % 2 == 0 {
            ("P", vec![feats[i], feats[i] * 0.5 - 1.0])
        } else {
            ("Q", vec![feats[i]])
        };
        let label = (ty == "P" && labels[i]).then(|| classes[i % 4 / 2].as_str());
        b.add_node(&format!("n{i}"), ty, f, label).unwrap();
    }
    b.add_edge("n0", "n1", "cross").unwrap();
    for &(a, c) in edges {
        let (a, c) = (a % n, c % n);
        if a != c {
            let et = if a % 2 == c % 2 { "same" } else { "cross" };
            b.add_edge(&format!("n{a}"), &format!("n{c}"), et).unwrap();
        }
    }
    b.build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn save_then_load_is_identity(
        n in 2usize..20,
        edges in prop::collection::vec((0usize..20, 0usize..20), 1..40),
        feats in prop::collection::vec(-1e3f64..1e3, 20),
        labels in prop::collection::vec(any::<bool>(), 20),
    ) {
        let g = featured_graph(n, &edges, &feats, &labels);
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_graph(&g, dir.path()).unwrap();
        let back = load_graph(&manifest).unwrap();
        prop_assert_eq!(back.name(), g.name());
        prop_assert_eq!(back.role(), g.role());
        prop_assert_eq!(back.classes(), g.classes());
        prop_assert_eq!(back.node_types(), g.node_types());
        prop_assert_eq!(back.edge_types(), g.edge_types());
        prop_assert_eq!(back.nodes(), g.nodes());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn degrees_sum_to_twice_the_edges(n in 3usize..30, p in 0.05f64..0.6, seed in 0u64..1000) {
        let g = common::random_graph(n, 3, p, seed);
        let total: usize = (0..g.num_nodes()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(total, 2 * g.num_edges());
        let avg = g.type_average_degrees();
        let weighted: f64 = (0..g.node_types().len())
            .map(|t| avg[t] * g.nodes_of_type(t).len() as f64)
            .sum();
        prop_assert!((weighted - total as f64).abs() < 1e-9);
    }
}
