//! Per-graph precomputation and mini-batch assembly.
//!
//! A batch stacks the node rows of its graphs into one matrix and joins
//! their filters block-diagonally, so one sparse product convolves every
//! graph at once and no padding is needed. Pooling is a sparse `B × N`
//! matrix of ones.

use std::sync::Arc;

use rayon::prelude::*;

use super::{EncoderConfig, InputFilter};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{conv_filter_sparse, gaussian_features_stream, normalized_laplacian, Graph};
use crate::matrix::{Matrix, SparseMatrix};
use crate::rng;

/// Encoder inputs for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    /// `f(L)·X`, `n × d`.
    pub fx: Matrix,
    /// Convolution filter `D^{-1/2} A D^{-1/2} + I`.
    pub filter: SparseMatrix,
    pub adjacency: Matrix,
    /// Present when `X` was generated: the input filter (`None` for the
    /// identity) and the feature width, so fresh draws can replace `X`.
    pub generated: Option<(Option<Matrix>, usize)>,
}

impl PreparedGraph {
    pub fn node_count(&self) -> usize {
        self.fx.rows()
    }

    /// A copy with the generated Gaussian features redrawn from `stream` of
    /// `seed`; graphs with their own features are returned unchanged.
    pub fn redraw(&self, seed: u64, stream: u64) -> Result<PreparedGraph> {
        let Some((filter, d)) = &self.generated else {
            return Ok(self.clone());
        };
        let x = gaussian_features_stream(self.node_count(), *d, 1.0 / (*d as f64).sqrt(), seed, stream)?;
        let fx = match filter {
            Some(f) => f.matmul(&x)?,
            None => x,
        };
        Ok(PreparedGraph { fx, ..self.clone() })
    }
}

/// Prepares one graph. Graphs without features get Gaussian features of
/// width `cfg.gaussian_dim` and standard deviation `1/√d`, drawn from
/// `stream` of `seed`.
pub fn prepare_graph(g: &Graph, cfg: &EncoderConfig, seed: u64, stream: u64) -> Result<PreparedGraph> {
    let n = g.node_count();
    let (x, gaussian) = match g.features() {
        Some(x) => (x.clone(), false),
        None => {
            let d = cfg.gaussian_dim;
            let sigma = 1.0 / (d as f64).sqrt();
            (gaussian_features_stream(n, d, sigma, seed, stream)?, true)
        }
    };
    if x.rows() != n {
        return Err(Error::shape("input features", &x.shape(), &[n]));
    }
    let laplacian = match cfg.input_filter {
        InputFilter::Identity => false,
        InputFilter::Laplacian => true,
        InputFilter::Auto => gaussian,
    };
    let filter = laplacian.then(|| normalized_laplacian(g));
    let fx = match &filter {
        Some(f) => f.matmul(&x)?,
        None => x.clone(),
    };
    Ok(PreparedGraph {
        fx,
        filter: conv_filter_sparse(g),
        adjacency: g.adjacency(),
        generated: gaussian.then(|| (filter, x.cols())),
    })
}

/// Stream for graph `index` of dataset `name`.
pub fn feature_stream(name: &str, index: usize) -> u64 {
    rng::name_stream(name).wrapping_add(index as u64)
}

pub fn prepare_dataset(ds: &Dataset, cfg: &EncoderConfig, seed: u64) -> Result<Vec<PreparedGraph>> {
    ds.graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| prepare_graph(g, cfg, seed, feature_stream(&ds.name, i)))
        .collect()
}

/// Input width the encoder sees for a dataset.
pub fn input_dim(ds: &Dataset, cfg: &EncoderConfig) -> usize {
    if ds.feature_dim > 0 {
        ds.feature_dim
    } else {
        cfg.gaussian_dim
    }
}

/// Several graphs of one dataset, stacked.
#[derive(Debug, Clone)]
pub struct Batch {
    /// Dataset indices of the graphs, in batch order.
    pub indices: Vec<usize>,
    pub fx: Matrix,
    pub filter: Arc<SparseMatrix>,
    pub pool: Arc<SparseMatrix>,
    /// Row offset of each graph in the stacked node matrix, plus the total.
    pub offsets: Vec<usize>,
    pub adjacency: Vec<Matrix>,
    pub labels: Option<Vec<usize>>,
}

impl Batch {
    pub fn new(prepared: &[PreparedGraph], indices: &[usize], labels: Option<&[usize]>) -> Result<Self> {
        let mut parts = Vec::with_capacity(indices.len());
        for &i in indices {
            parts.push(prepared.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: prepared.len(),
            })?);
        }
        Batch::from_parts(&parts, indices, labels)
    }

    /// Stacks `parts`, which are the graphs at dataset positions `indices`.
    /// `labels` is indexed by dataset position.
    pub fn from_parts(parts: &[&PreparedGraph], indices: &[usize], labels: Option<&[usize]>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if parts.len() != indices.len() {
            return Err(Error::shape("batch parts", &[parts.len()], &[indices.len()]));
        }
        let mut offsets = vec![0];
        for p in parts {
            offsets.push(offsets.last().unwrap() + p.node_count());
        }
        let total = *offsets.last().unwrap();
        let fx = Matrix::vstack(&parts.iter().map(|p| &p.fx).collect::<Vec<_>>())?;
        let filter = SparseMatrix::block_diagonal(&parts.iter().map(|p| &p.filter).collect::<Vec<_>>());
        let pool = SparseMatrix::from_triplets(
            parts.len(),
            total,
            (0..parts.len())
                .flat_map(|b| (offsets[b]..offsets[b + 1]).map(move |v| (b, v, 1.0)))
                .collect(),
        );
        let labels = match labels {
            Some(l) => Some(
                indices
                    .iter()
                    .map(|&i| {
                        l.get(i)
                            .copied()
                            .ok_or(Error::IndexOutOfRange { index: i, len: l.len() })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(Batch {
            indices: indices.to_vec(),
            fx,
            filter: Arc::new(filter),
            pool: Arc::new(pool),
            adjacency: parts.iter().map(|p| p.adjacency.clone()).collect(),
            offsets,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn node_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_and_pooling() {
        let cfg = EncoderConfig::default();
        let gs = [Graph::path(2), Graph::complete(3), Graph::cycle(4)];
        let prepared: Vec<_> = gs
            .iter()
            .enumerate()
            .map(|(i, g)| prepare_graph(g, &cfg, 1, i as u64).unwrap())
            .collect();
        let b = Batch::new(&prepared, &[2, 0], Some(&[7, 8, 9])).unwrap();
        assert_eq!(b.offsets, vec![0, 4, 6]);
        assert_eq!(b.fx.shape(), [6, cfg.gaussian_dim]);
        assert_eq!(b.fx.slice_rows(4, 6), prepared[0].fx);
        assert_eq!(b.labels, Some(vec![9, 7]));
        let pool = b.pool.to_dense();
        assert_eq!(pool.row(0), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.filter.to_dense()[(4, 5)], 1.0);
        assert_eq!(b.filter.to_dense()[(3, 4)], 0.0);
        assert!(Batch::new(&prepared, &[3], None).is_err());
    }

    #[test]
    fn gaussian_inputs_use_the_laplacian_and_features_do_not() {
        let cfg = EncoderConfig::default();
        let g = Graph::complete(3);
        let p = prepare_graph(&g, &cfg, 4, 0).unwrap();
        // L_sym of a regular graph annihilates constant vectors: columns sum to 0.
        assert!(p.fx.column_sums().iter().all(|s| s.abs() < 1e-12));
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let g = g.with_features(x.clone()).unwrap();
        assert_eq!(prepare_graph(&g, &cfg, 4, 0).unwrap().fx, x);
    }

    #[test]
    fn redraw_replaces_only_generated_features() {
        let cfg = EncoderConfig::default();
        let p = prepare_graph(&Graph::cycle(5), &cfg, 1, 0).unwrap();
        let q = p.redraw(2, 0).unwrap();
        assert_ne!(q.fx, p.fx);
        assert_eq!(q.filter, p.filter);
        assert_eq!(p.redraw(1, 0).unwrap(), p);
        let x = Matrix::identity(5);
        let own = prepare_graph(&Graph::cycle(5).with_features(x).unwrap(), &cfg, 1, 0).unwrap();
        assert_eq!(own.redraw(2, 0).unwrap(), own);
    }
}
