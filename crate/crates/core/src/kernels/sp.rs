//! Shortest-path features: counts of `(label_a, label_b, distance)` over
//! unordered node pairs connected by a path, with `label_a <= label_b`.

use std::collections::{BTreeMap, VecDeque};

use crate::graph::Graph;

pub type SpFeatures = BTreeMap<(i64, i64, usize), u64>;

/// Labels used for graphs that carry no node labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelFallback {
    #[default]
    Degree,
    Uniform,
}

/// Shortest-path features, degree labels for unlabeled graphs.
pub fn sp_features(g: &Graph) -> SpFeatures {
    sp_features_with(g, LabelFallback::Degree)
}

pub fn sp_features_with(g: &Graph, fallback: LabelFallback) -> SpFeatures {
    let labels = match (g.node_labels(), fallback) {
        (Some(l), _) => l.to_vec(),
        (None, LabelFallback::Degree) => g.labels_or_degrees(),
        (None, LabelFallback::Uniform) => vec![0; g.node_count()],
    };
    let n = g.node_count();
    let mut feats = SpFeatures::new();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        for t in s + 1..n {
            if dist[t] == usize::MAX {
                continue;
            }
            let (a, b) = (labels[s].min(labels[t]), labels[s].max(labels[t]));
            *feats.entry((a, b, dist[t])).or_insert(0) += 1;
        }
    }
    feats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(g: Graph) -> Graph {
        let n = g.node_count();
        g.with_node_labels(vec![0; n]).unwrap()
    }

    #[test]
    fn path_of_three() {
        let f = sp_features(&uniform(Graph::path(3)));
        let want: SpFeatures = [((0, 0, 1), 2), ((0, 0, 2), 1)].into_iter().collect();
        assert_eq!(f, want);
        assert_eq!(f.values().map(|c| c * c).sum::<u64>(), 5);
    }

    #[test]
    fn single_edge_and_disjoint_edges() {
        let want: SpFeatures = [((0, 0, 1), 1)].into_iter().collect();
        assert_eq!(sp_features(&uniform(Graph::complete(2))), want);
        assert_eq!(sp_features_with(&Graph::complete(2), LabelFallback::Uniform), want);

        let two = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let want: SpFeatures = [((0, 0, 1), 2)].into_iter().collect();
        assert_eq!(sp_features(&uniform(two)), want);
    }

    #[test]
    fn degree_fallback_and_label_order() {
        // Path degrees are 1,2,1: pairs (1,2,1)x2 and (1,1,2)x1.
        let f = sp_features(&Graph::path(3));
        let want: SpFeatures = [((1, 2, 1), 2), ((1, 1, 2), 1)].into_iter().collect();
        assert_eq!(f, want);
        let g = Graph::path(2).with_node_labels(vec![9, 3]).unwrap();
        assert!(sp_features(&g).contains_key(&(3, 9, 1)));
    }
}
