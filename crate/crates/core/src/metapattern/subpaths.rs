use std::collections::BTreeMap;

use super::{canonical, MetaPattern, WalkSet};
use crate::hetgraph::HetGraph;

/// Canonical type sequence -> node sequences observed in walks.
pub type SubpathGroups = BTreeMap<Vec<usize>, Vec<Vec<usize>>>;

/// Cuts every walk at consecutive occurrences of the focal type. Each piece
/// has focal-type endpoints and no focal-type interior node; pieces of
/// 2..=`max_edges` edges are grouped by canonical type sequence.
pub fn extract_subpaths(
    g: &HetGraph,
    walks: &WalkSet,
    focal: usize,
    max_edges: usize,
) -> SubpathGroups {
    let mut groups = SubpathGroups::new();
    for walk in walks.iter() {
        let mut last: Option<usize> = None;
        for (pos, &v) in walk.iter().enumerate() {
            if g.type_of(v) != focal {
                continue;
            }
            if let Some(start) = last {
                let len = pos - start;
                if (2..=max_edges).contains(&len) {
                    let nodes = &walk[start..=pos];
                    let types: Vec<usize> = nodes.iter().map(|&u| g.type_of(u)).collect();
                    groups
                        .entry(canonical(&types))
                        .or_default()
                        .push(nodes.to_vec());
                }
            }
            last = Some(pos);
        }
    }
    groups
}

/// The `k` groups with the most subpaths; ties go to the lexicographically
/// smaller canonical sequence.
pub fn select_meta_patterns(groups: &SubpathGroups, k: usize) -> Vec<MetaPattern> {
    let mut ranked: Vec<(&Vec<usize>, usize)> =
        groups.iter().map(|(t, paths)| (t, paths.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(k)
        .map(|(t, c)| MetaPattern::new(t.clone(), c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::{HetGraphBuilder, Role};

    // A=0 (author), P=1 (paper)
    fn ap_graph() -> HetGraph {
        let mut b = HetGraphBuilder::new("ap", Role::Source, vec![]);
        for (id, t) in [("A1", "A"), ("A2", "A"), ("A3", "A"), ("P1", "P"), ("P2", "P")] {
            b.add_node(id, t, vec![], None).unwrap();
        }
        b.add_edge("A1", "P1", "w").unwrap();
        b.add_edge("A2", "P1", "w").unwrap();
        b.add_edge("A2", "P2", "w").unwrap();
        b.add_edge("A3", "P2", "w").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn single_subpath() {
        let g = ap_graph();
        let ws = WalkSet {
            walks: vec![vec![0, 3, 1]],
        };
        let groups = extract_subpaths(&g, &ws, 0, 4);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[&vec![0, 1, 0]], vec![vec![0, 3, 1]]);
    }

    #[test]
    fn minimal_subpaths_only() {
        let g = ap_graph();
        let ws = WalkSet {
            walks: vec![vec![0, 3, 1, 4, 2]],
        };
        let groups = extract_subpaths(&g, &ws, 0, 4);
        assert_eq!(groups[&vec![0, 1, 0]], vec![vec![0, 3, 1], vec![1, 4, 2]]);
        assert_eq!(groups.values().map(Vec::len).sum::<usize>(), 2);
    }

    #[test]
    fn no_focal_nodes() {
        let g = ap_graph();
        let ws = WalkSet {
            walks: vec![vec![3, 1, 4]],
        };
        // walk P1 A2 P2 contains no author-to-author piece
        assert!(extract_subpaths(&g, &ws, 0, 4).is_empty());
    }

    fn groups_with_counts(counts: &[(Vec<usize>, usize)]) -> SubpathGroups {
        counts
            .iter()
            .map(|(t, c)| (t.clone(), vec![vec![]; *c]))
            .collect()
    }

    #[test]
    fn top_k_by_count() {
        let g = groups_with_counts(&[(vec![0, 1, 0], 5), (vec![0, 2, 0], 3), (vec![0, 3, 0], 1)]);
        let sel = select_meta_patterns(&g, 2);
        let seqs: Vec<&Vec<usize>> = sel.iter().map(|p| &p.types).collect();
        assert_eq!(seqs, vec![&vec![0, 1, 0], &vec![0, 2, 0]]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let g = groups_with_counts(&[(vec![0, 2, 0], 3), (vec![0, 1, 0], 3)]);
        let sel = select_meta_patterns(&g, 1);
        assert_eq!(sel[0].types, vec![0, 1, 0]);
        assert!(select_meta_patterns(&SubpathGroups::new(), 3).is_empty());
    }
}
