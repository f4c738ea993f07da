//! Weisfeiler-Lehman subtree features.
//!
//! Each refinement step replaces a node's label with the compressed id of
//! `(old label, sorted multiset of neighbor labels)`. Within one step all new
//! signatures are collected, sorted and only then assigned ids, so the ids
//! depend on the set of signatures and never on node or graph order. The
//! feature map of a graph counts every compressed label seen in steps `0..=h`.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WlSignature {
    /// Step 0: the original node label (or degree).
    Initial(i64),
    /// Step t > 0: previous compressed label and the sorted neighbor labels.
    Refined { prev: u64, neighbors: Vec<u64> },
}

/// Compressed-label dictionary. Shared across a dataset so that features of
/// different graphs live in one coordinate system.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WlDictionary {
    ids: BTreeMap<WlSignature, u64>,
}

impl WlDictionary {
    pub fn new() -> Self {
        WlDictionary::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, sig: &WlSignature) -> Option<u64> {
        self.ids.get(sig).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&WlSignature, u64)> {
        self.ids.iter().map(|(s, &i)| (s, i))
    }

    pub(crate) fn from_entries(entries: impl IntoIterator<Item = (WlSignature, u64)>) -> Self {
        WlDictionary {
            ids: entries.into_iter().collect(),
        }
    }

    /// Assigns ids to unseen signatures in sorted order.
    fn intern_all(&mut self, sigs: BTreeSet<WlSignature>) {
        let mut next = self.ids.len() as u64;
        for s in sigs {
            self.ids.entry(s).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
    }
}

/// Sparse map compressed label → occurrence count.
pub type WlFeatures = BTreeMap<u64, u64>;

/// WL features of a single graph with a fresh dictionary. Unlabeled graphs
/// start from node degrees.
pub fn wl_features(g: &Graph, h: usize) -> WlFeatures {
    let mut dict = WlDictionary::new();
    wl_features_dataset(std::slice::from_ref(g), h, &mut dict)
        .pop()
        .expect("one graph in, one feature map out")
}

/// WL features for a whole dataset, extending `dict` with every new
/// signature. Runs the refinement in lockstep across graphs so each step's
/// ids are assigned in one sorted pass.
pub fn wl_features_dataset(graphs: &[Graph], h: usize, dict: &mut WlDictionary) -> Vec<WlFeatures> {
    let initial: Vec<Vec<WlSignature>> = graphs
        .iter()
        .map(|g| g.labels_or_degrees().into_iter().map(WlSignature::Initial).collect())
        .collect();
    let mut labels = relabel(initial, dict);
    let mut feats: Vec<WlFeatures> = labels.iter().map(|l| count(l)).collect();

    for _ in 0..h {
        let sigs: Vec<Vec<WlSignature>> = graphs
            .iter()
            .zip(&labels)
            .map(|(g, l)| {
                (0..g.node_count())
                    .map(|v| {
                        let mut nb: Vec<u64> = g.neighbors(v).iter().map(|&w| l[w]).collect();
                        nb.sort_unstable();
                        WlSignature::Refined {
                            prev: l[v],
                            neighbors: nb,
                        }
                    })
                    .collect()
            })
            .collect();
        labels = relabel(sigs, dict);
        for (f, l) in feats.iter_mut().zip(&labels) {
            for (k, c) in count(l) {
                *f.entry(k).or_insert(0) += c;
            }
        }
    }
    feats
}

fn relabel(sigs: Vec<Vec<WlSignature>>, dict: &mut WlDictionary) -> Vec<Vec<u64>> {
    let fresh: BTreeSet<WlSignature> = sigs
        .iter()
        .flatten()
        .filter(|s| dict.get(s).is_none())
        .cloned()
        .collect();
    dict.intern_all(fresh);
    sigs.into_iter()
        .map(|g| g.iter().map(|s| dict.get(s).expect("interned")).collect())
        .collect()
}

fn count(labels: &[u64]) -> WlFeatures {
    let mut m = WlFeatures::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}
