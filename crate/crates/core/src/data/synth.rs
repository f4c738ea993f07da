//! Seeded synthetic graphs and datasets.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{featurize, Dataset};
use crate::graph::Graph;
use crate::rng;

/// Erdős–Rényi `G(n, p)`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng::stream(seed, 0x4552);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).expect("sampled edges are simple")
}

/// Random `k`-regular graph on `n` nodes by the pairing model, retrying
/// until the pairing is simple. `n·k` must be even.
pub fn random_regular(n: usize, k: usize, seed: u64) -> Option<Graph> {
    if !(n * k).is_multiple_of(2) || k >= n {
        return None;
    }
    let mut r = rng::stream(seed, 0x5245);
    for _ in 0..10_000 {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
        stubs.shuffle(&mut r);
        let edges: Vec<(usize, usize)> = stubs.chunks(2).map(|c| (c[0], c[1])).collect();
        if let Ok(g) = Graph::new(n, edges) {
            return Some(g);
        }
    }
    None
}

fn size_range(lo: usize, hi: usize, min: usize) -> (usize, usize) {
    let lo = lo.max(min);
    (lo, hi.max(lo))
}

/// Cycles (class 0) against cliques (class 1), alternating, sizes uniform in
/// `[lo, hi]`. Sizes below 4 are raised to 4 because `C3 = K3`. Graphs carry
/// no node labels or features.
pub fn synth_cycles_vs_cliques(count: usize, (lo, hi): (usize, usize), seed: u64) -> Dataset {
    let (lo, hi) = size_range(lo, hi, 4);
    let mut r = rng::stream(seed, 0x4343);
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let n = r.random_range(lo..=hi);
        if i % 2 == 0 {
            graphs.push(Graph::cycle(n));
            labels.push(0);
        } else {
            graphs.push(Graph::complete(n));
            labels.push(1);
        }
    }
    Dataset::from_raw_labels("cycles-vs-cliques", graphs, &labels).expect("consistent by construction")
}

/// Stars (class 0) against paths (class 1), alternating, sizes uniform in
/// `[lo, hi]` (at least 4). Node labels are degrees capped at 3, one-hot
/// encoded as features.
pub fn synth_stars_vs_paths(count: usize, (lo, hi): (usize, usize), seed: u64) -> Dataset {
    let (lo, hi) = size_range(lo, hi, 4);
    let mut r = rng::stream(seed, 0x5350);
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let n = r.random_range(lo..=hi);
        let g = if i % 2 == 0 { Graph::star(n) } else { Graph::path(n) };
        let node_labels = g.degrees().into_iter().map(|d| d.min(3) as i64).collect();
        graphs.push(g.with_node_labels(node_labels).expect("one label per node"));
        labels.push((i % 2) as i64);
    }
    let graphs = featurize(graphs, None).expect("labels present on every graph");
    Dataset::from_raw_labels("stars-vs-paths", graphs, &labels).expect("consistent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_matrix, KernelConfig, KernelKind};

    #[test]
    fn size_three_is_excluded() {
        let d = synth_cycles_vs_cliques(4, (3, 3), 1);
        assert!(d.graphs.iter().all(|g| g.node_count() == 4));
        assert_ne!(d.graphs[0], d.graphs[1]);
    }

    #[test]
    fn balanced_and_deterministic() {
        let d = synth_cycles_vs_cliques(200, (4, 12), 9);
        assert_eq!(d.class_counts(), vec![100, 100]);
        assert_eq!(d, synth_cycles_vs_cliques(200, (4, 12), 9));
        assert_ne!(d, synth_cycles_vs_cliques(200, (4, 12), 10));
        let s = synth_stars_vs_paths(10, (4, 8), 3);
        assert_eq!(s, synth_stars_vs_paths(10, (4, 8), 3));
        assert_eq!(s.feature_dim, 3);
    }

    #[test]
    fn wl_kernel_separates_cycles_from_cliques() {
        let d = synth_cycles_vs_cliques(40, (4, 12), 2);
        let k = kernel_matrix(&d.graphs, KernelKind::Wl, &KernelConfig::default()).unwrap();
        for i in 0..d.len() {
            for j in 0..d.len() {
                let v = k.get(i, j);
                if d.labels[i] != d.labels[j] {
                    assert_eq!(v, 0.0);
                } else if d.labels[i] == 0 {
                    // every cycle has all-degree-2 refinements
                    assert_eq!(v, 1.0);
                } else {
                    let same = d.graphs[i].node_count() == d.graphs[j].node_count();
                    assert_eq!(v == 1.0, same);
                }
            }
        }
    }

    #[test]
    fn regular_graphs() {
        let g = random_regular(8, 3, 5).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 3));
        assert!(random_regular(7, 3, 5).is_none());
    }
}
