use log::warn;

use super::{is_palindrome, Category, MetaPattern, MinerConfig, PatternCatalog};
use crate::error::{CgflError, Result};
use crate::hetgraph::HetGraph;

/// `max(d1, d2) / min(d1, d2)`, or `None` when either degree is zero.
pub fn ratio_from_degrees(d1: f64, d2: f64) -> Option<f64> {
    if d1 <= 0.0 || d2 <= 0.0 {
        None
    } else {
        Some(d1.max(d2) / d1.min(d2))
    }
}

/// Degree ratio of two node types.
pub fn relation_ratio(g: &HetGraph, t1: usize, t2: usize) -> Result<f64> {
    let degrees = g.type_average_degrees();
    for t in [t1, t2] {
        if t >= degrees.len() {
            return Err(CgflError::invalid(format!("unknown node type id {t}")));
        }
    }
    ratio_from_degrees(degrees[t1], degrees[t2]).ok_or_else(|| {
        let t = if degrees[t1] <= 0.0 { t1 } else { t2 };
        CgflError::DegenerateDegree(g.type_name(t).to_string())
    })
}

/// Maximum degree ratio over consecutive type pairs. A degenerate pair
/// counts as `+inf`.
pub fn dispersion_from_degrees(types: &[usize], degrees: &[f64]) -> f64 {
    types
        .windows(2)
        .map(|w| ratio_from_degrees(degrees[w[0]], degrees[w[1]]).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn pattern_dispersion(p: &MetaPattern, g: &HetGraph) -> f64 {
    dispersion_from_degrees(&p.types, &g.type_average_degrees())
}

/// Affiliation patterns (dispersion >= `theta_mp`) split on symmetry,
/// interaction patterns on edge length.
pub fn classify(types: &[usize], dispersion: f64, theta_mp: f64, theta_lp: usize) -> Category {
    if dispersion >= theta_mp {
        if is_palindrome(types) {
            Category::Sap
        } else {
            Category::Wap
        }
    } else if types.len() - 1 <= theta_lp {
        Category::Sip
    } else {
        Category::Wip
    }
}

/// Fills in dispersion and category for every pattern of the catalog.
pub fn categorize(catalog: &mut PatternCatalog, g: &HetGraph, cfg: &MinerConfig) {
    let degrees = g.type_average_degrees();
    for p in &mut catalog.patterns {
        let d = dispersion_from_degrees(&p.types, &degrees);
        if d.is_infinite() {
            warn!(
                "pattern {:?} in `{}` touches a zero-degree type; treated as affiliation",
                p.types,
                g.name()
            );
        }
        p.dispersion = Some(d);
        p.category = Some(classify(&p.types, d, cfg.theta_mp, cfg.theta_lp));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::fixtures::star;
    use proptest::prelude::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_from_degrees(20.0, 2.0), Some(10.0));
        assert_eq!(ratio_from_degrees(5.0, 5.0), Some(1.0));
        assert_eq!(ratio_from_degrees(0.0, 5.0), None);
        let g = star(8);
        let (a, b) = (g.type_id("A").unwrap(), g.type_id("B").unwrap());
        assert_eq!(relation_ratio(&g, a, b).unwrap(), 8.0);
    }

    #[test]
    fn degenerate_type_is_reported() {
        let mut b = crate::hetgraph::HetGraphBuilder::new("g", crate::hetgraph::Role::Source, vec![]);
        b.add_node("a", "A", vec![], None).unwrap();
        b.add_node("b", "B", vec![], None).unwrap();
        b.add_node("z", "Z", vec![], None).unwrap();
        b.add_edge("a", "b", "ab").unwrap();
        let g = b.build().unwrap();
        let z = g.type_id("Z").unwrap();
        assert!(matches!(
            relation_ratio(&g, 0, z),
            Err(CgflError::DegenerateDegree(t)) if t == "Z"
        ));
        assert!(dispersion_from_degrees(&[0, z, 0], &g.type_average_degrees()).is_infinite());
    }

    #[test]
    fn dispersion_takes_the_max_pair() {
        // degrees: A=8, B=1, C=1  -> pairs (A,B)=8, (B,C)=1
        let degrees = [8.0, 1.0, 1.0];
        assert_eq!(dispersion_from_degrees(&[1, 0, 1], &degrees), 8.0);
        assert_eq!(dispersion_from_degrees(&[1, 2, 1], &degrees), 1.0);
        assert_eq!(dispersion_from_degrees(&[0, 0, 0], &[3.0]), 1.0);
    }

    #[test]
    fn four_way_rules() {
        // U=0, C=1, I=2; A=3, B=4
        assert_eq!(classify(&[0, 1, 0], 12.0, 10.0, 3), Category::Sap);
        assert_eq!(classify(&[0, 1, 2, 0], 12.0, 10.0, 3), Category::Wap);
        assert_eq!(classify(&[3, 4, 3], 1.5, 10.0, 3), Category::Sip);
        assert_eq!(classify(&[3, 4, 5, 4, 3], 1.5, 10.0, 3), Category::Wip);
        // boundary: exactly theta_mp is affiliation, exactly theta_lp is strong
        assert_eq!(classify(&[0, 1, 2, 0], 10.0, 10.0, 3), Category::Wap);
        assert_eq!(classify(&[0, 1, 2, 0], 9.99, 10.0, 3), Category::Sip);
    }

    proptest! {
        #[test]
        fn reversal_does_not_change_category(
            inner in prop::collection::vec(0usize..4, 1..4),
            d in 0.5f64..30.0,
        ) {
            let mut seq = vec![0usize];
            seq.extend(inner);
            seq.push(0);
            let rev: Vec<usize> = seq.iter().rev().copied().collect();
            prop_assert_eq!(classify(&seq, d, 10.0, 3), classify(&rev, d, 10.0, 3));
        }
    }
}
