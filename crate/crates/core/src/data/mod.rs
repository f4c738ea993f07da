//! Datasets, loaders, synthetic generators and persistence.

pub mod checkpoint;
pub mod mutag;
pub mod synth;
pub mod tu;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

/// A labeled collection of graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Class ids, contiguous from 0.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Original label value of each class id, ascending.
    pub class_values: Vec<i64>,
    /// Node feature width; 0 when graphs carry no features.
    pub feature_dim: usize,
}

impl Dataset {
    /// Builds a dataset from original (arbitrary integer) graph labels,
    /// remapping them to `0..C` in ascending order of the original values.
    pub fn from_raw_labels(name: impl Into<String>, graphs: Vec<Graph>, raw: &[i64]) -> Result<Self> {
        if raw.len() != graphs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} graphs",
                raw.len(),
                graphs.len()
            )));
        }
        let class_values: Vec<i64> = raw
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<i64, usize> = class_values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let labels = raw.iter().map(|v| index[v]).collect();
        let feature_dim = graphs.first().and_then(Graph::features).map_or(0, Matrix::cols);
        let ds = Dataset {
            name: name.into(),
            graphs,
            labels,
            num_classes: class_values.len(),
            class_values,
            feature_dim,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.graphs.len() {
            return Err(Error::InvalidArgument("labels and graphs differ in length".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::InvalidArgument(format!(
                "class id {bad} >= num_classes {}",
                self.num_classes
            )));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            let w = g.features().map_or(0, Matrix::cols);
            if w != self.feature_dim {
                return Err(Error::InvalidArgument(format!(
                    "graph {i} has feature width {w}, dataset has {}",
                    self.feature_dim
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Number of graphs per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Appends a graph with an existing class id.
    pub fn push(&mut self, g: Graph, label: usize) -> Result<()> {
        let w = g.features().map_or(0, Matrix::cols);
        if w != self.feature_dim || label >= self.num_classes {
            return Err(Error::InvalidArgument("graph does not fit the dataset".into()));
        }
        self.graphs.push(g);
        self.labels.push(label);
        Ok(())
    }
}

/// Node features from categorical labels and continuous attributes.
///
/// Categorical labels become one-hot columns over the sorted label
/// vocabulary of the whole collection; attributes are appended after them.
pub fn featurize(graphs: Vec<Graph>, attributes: Option<Vec<Matrix>>) -> Result<Vec<Graph>> {
    let vocab: Vec<i64> = graphs
        .iter()
        .filter_map(Graph::node_labels)
        .flatten()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let labeled = graphs.iter().all(|g| g.node_labels().is_some()) && !vocab.is_empty();
    let one_hot = if labeled { vocab.len() } else { 0 };
    let attr_dim = attributes.as_ref().and_then(|a| a.first()).map_or(0, Matrix::cols);
    if one_hot + attr_dim == 0 {
        return Ok(graphs);
    }
    let index: BTreeMap<i64, usize> = vocab.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut out = Vec::with_capacity(graphs.len());
    for (gi, g) in graphs.into_iter().enumerate() {
        let n = g.node_count();
        let mut x = Matrix::zeros(n, one_hot + attr_dim);
        if labeled {
            for (v, l) in g.node_labels().unwrap().iter().enumerate() {
                x[(v, index[l])] = 1.0;
            }
        }
        if let Some(attrs) = &attributes {
            let a = &attrs[gi];
            if a.rows() != n || a.cols() != attr_dim {
                return Err(Error::InvalidArgument(format!(
                    "graph {gi}: attribute matrix {:?} does not match {n} nodes × {attr_dim}",
                    a.shape()
                )));
            }
            for v in 0..n {
                x.row_mut(v)[one_hot..].copy_from_slice(a.row(v));
            }
        }
        out.push(g.with_features(x)?);
    }
    Ok(out)
}
