//! Cycle-count baseline for MUTAG.
//!
//! Mutagenic compounds in MUTAG tend to contain three or more rings, so
//! counting independent cycles alone is a strong predictor.

use super::Dataset;
use crate::graph::Graph;

/// Number of independent cycles, `|E| − |V| + c`.
pub fn cyclomatic_number(g: &Graph) -> usize {
    let (_, components) = g.connected_components();
    g.edge_count() + components - g.node_count()
}

/// Predicts rule label 1 for three or more independent cycles, 2 otherwise.
pub fn mutag_cycle_rule(g: &Graph) -> u8 {
    if cyclomatic_number(g) >= 3 {
        1
    } else {
        2
    }
}

/// Class id the rule label refers to in a dataset with remapped labels.
///
/// Rule label 1 denotes the class with the largest original value (`1` in
/// the TU release); rule label 2 denotes the other one.
pub fn rule_class(ds: &Dataset, rule_label: u8) -> usize {
    let top = ds.num_classes.saturating_sub(1);
    if rule_label == 1 {
        top
    } else {
        usize::from(top == 0)
    }
}

/// Accuracy of the cycle rule on a two-class dataset.
pub fn cycle_rule_accuracy(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let hits = ds
        .graphs
        .iter()
        .zip(&ds.labels)
        .filter(|(g, &l)| rule_class(ds, mutag_cycle_rule(g)) == l)
        .count();
    hits as f64 / ds.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_has_no_cycles() {
        let g = Graph::star(6);
        assert_eq!(cyclomatic_number(&g), 0);
        assert_eq!(mutag_cycle_rule(&g), 2);
    }

    #[test]
    fn fused_triangles() {
        // Triangles 012, 123, 234 share edges; 5 nodes, 7 edges.
        let g = Graph::new(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]).unwrap();
        assert_eq!(g.edge_count(), 7);
        assert_eq!(cyclomatic_number(&g), 3);
        assert_eq!(mutag_cycle_rule(&g), 1);
    }

    #[test]
    fn disconnected_count_per_component() {
        let g = Graph::disjoint_union(&[Graph::cycle(4), Graph::cycle(5), Graph::path(3)]).unwrap();
        assert_eq!(cyclomatic_number(&g), 2);
    }

    #[test]
    fn accuracy_uses_native_label_mapping() {
        let rings = Graph::complete(4); // 6 − 4 + 1 = 3
        let chain = Graph::path(4);
        let ds = Dataset::from_raw_labels("m", vec![rings.clone(), chain.clone(), rings], &[1, -1, -1]).unwrap();
        assert_eq!(rule_class(&ds, 1), 1);
        assert_eq!(rule_class(&ds, 2), 0);
        assert!((cycle_rule_accuracy(&ds) - 2.0 / 3.0).abs() < 1e-12);
    }
}
