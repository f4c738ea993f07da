//! Dataset-level graph kernels used as decoder targets.
//!
//! Three feature maps are supported: Weisfeiler-Lehman subtree counts,
//! shortest-path triples and spectral-distance histograms. A kernel matrix
//! holds the cosine-normalized dot products `K_ij / sqrt(K_ii K_jj)` of the
//! feature vectors of every pair of graphs in a dataset; training reads
//! `B × B` slices of it per batch.

pub mod cache;
pub mod fgsd;
pub mod sp;
pub mod wl;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::eigendecompose;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

pub use fgsd::{fgsd_features, fgsd_features_with, FgsdVariant};
pub use sp::{sp_features, sp_features_with, LabelFallback, SpFeatures};
pub use wl::{wl_features, wl_features_dataset, WlDictionary, WlFeatures, WlSignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "wl")]
    Wl,
    #[serde(rename = "sp")]
    Sp,
    #[serde(rename = "fgsd")]
    Fgsd,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Wl, KernelKind::Sp, KernelKind::Fgsd];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Wl => "wl",
            KernelKind::Sp => "sp",
            KernelKind::Fgsd => "fgsd",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            KernelKind::Wl => 0,
            KernelKind::Sp => 1,
            KernelKind::Fgsd => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        KernelKind::ALL.into_iter().find(|k| k.code() == c)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// WL refinement steps `h`.
    pub wl_iterations: usize,
    pub fgsd_bins: usize,
    pub fgsd_range_max: f64,
    pub fgsd_variant: FgsdVariant,
    /// Unlabeled graphs use degree labels for shortest-path triples when
    /// set, a single uniform label otherwise.
    pub sp_unlabeled_fallback: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            wl_iterations: 3,
            fgsd_bins: 200,
            fgsd_range_max: 10.0,
            fgsd_variant: FgsdVariant::Harmonic,
            sp_unlabeled_fallback: true,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.wl_iterations < 1 {
            return Err(Error::InvalidArgument("wl_iterations must be >= 1".into()));
        }
        if self.fgsd_bins < 2 {
            return Err(Error::InvalidArgument("fgsd_bins must be >= 2".into()));
        }
        if !(self.fgsd_range_max > 0.0 && self.fgsd_range_max.is_finite()) {
            return Err(Error::InvalidArgument("fgsd_range_max must be > 0".into()));
        }
        Ok(())
    }

    fn sp_fallback(&self) -> LabelFallback {
        if self.sp_unlabeled_fallback {
            LabelFallback::Degree
        } else {
            LabelFallback::Uniform
        }
    }
}

/// Normalized `m × m` kernel matrix for one kernel kind.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub values: Matrix,
    /// Self-similarities before normalization.
    pub raw_diag: Vec<f64>,
    /// Compressed-label dictionary for WL kernels.
    pub wl_dictionary: Option<WlDictionary>,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.raw_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_diag.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = eigendecompose(&self.values)?;
        Ok(d.eigenvalues.first().copied().unwrap_or(0.0))
    }
}

type SparseVec = Vec<(usize, f64)>;

/// Feature vectors of every graph for one kernel kind, in a shared index
/// space.
pub fn feature_vectors(
    dataset: &[Graph],
    kind: KernelKind,
    cfg: &KernelConfig,
) -> Result<(Vec<SparseVec>, Option<WlDictionary>)> {
    match kind {
        KernelKind::Wl => {
            let mut dict = WlDictionary::new();
            let feats = wl_features_dataset(dataset, cfg.wl_iterations, &mut dict);
            let vecs = feats
                .into_iter()
                .map(|f| f.into_iter().map(|(k, c)| (k as usize, c as f64)).collect())
                .collect();
            Ok((vecs, Some(dict)))
        }
        KernelKind::Sp => {
            let fallback = cfg.sp_fallback();
            let feats: Vec<SpFeatures> = dataset.par_iter().map(|g| sp_features_with(g, fallback)).collect();
            let keys: BTreeMap<(i64, i64, usize), usize> = feats
                .iter()
                .flat_map(|f| f.keys().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, k)| (k, i))
                .collect();
            let vecs = feats
                .into_iter()
                .map(|f| f.into_iter().map(|(k, c)| (keys[&k], c as f64)).collect())
                .collect();
            Ok((vecs, None))
        }
        KernelKind::Fgsd => {
            let hists: Result<Vec<Vec<f64>>> = dataset
                .par_iter()
                .map(|g| fgsd_features_with(g, cfg.fgsd_bins, cfg.fgsd_range_max, cfg.fgsd_variant))
                .collect();
            let vecs = hists?
                .into_iter()
                .map(|h| h.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect())
                .collect();
            Ok((vecs, None))
        }
    }
}

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Raw Gram matrix of feature dot products.
pub fn raw_gram(vectors: &[SparseVec]) -> Matrix {
    let m = vectors.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| sparse_dot(&vectors[i], &vectors[j])).collect())
        .collect();
    let mut k = Matrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            k[(i, i + off)] = v;
            k[(i + off, i)] = v;
        }
    }
    k
}

/// Cosine normalization. Graphs with zero self-similarity get 1 on the
/// diagonal and 0 elsewhere.
pub fn normalize(raw: &Matrix) -> Matrix {
    let m = raw.rows();
    Matrix::from_fn(m, m, |i, j| {
        if i == j {
            return 1.0;
        }
        let (di, dj) = (raw[(i, i)], raw[(j, j)]);
        if di <= 0.0 || dj <= 0.0 {
            return 0.0;
        }
        (raw[(i, j)] / (di.sqrt() * dj.sqrt())).clamp(0.0, 1.0)
    })
}

pub fn kernel_matrix(dataset: &[Graph], kind: KernelKind, cfg: &KernelConfig) -> Result<KernelMatrix> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("kernel matrix of an empty dataset".into()));
    }
    cfg.validate()?;
    let (vectors, wl_dictionary) = feature_vectors(dataset, kind, cfg)?;
    let raw = raw_gram(&vectors);
    let raw_diag = (0..raw.rows()).map(|i| raw[(i, i)]).collect();
    Ok(KernelMatrix {
        kind,
        values: normalize(&raw),
        raw_diag,
        wl_dictionary,
    })
}

/// `k.values[indices × indices]`.
pub fn batch_slice(k: &KernelMatrix, indices: &[usize]) -> Result<Matrix> {
    let m = k.len();
    if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index: bad, len: m });
    }
    let b = indices.len();
    Ok(Matrix::from_fn(b, b, |r, c| k.values[(indices[r], indices[c])]))
}

/// The kernels of one dataset, in a fixed kind order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub matrices: Vec<KernelMatrix>,
}

impl KernelSet {
    pub fn compute(dataset: &[Graph], kinds: &[KernelKind], cfg: &KernelConfig) -> Result<Self> {
        let matrices = kinds
            .iter()
            .map(|&k| kernel_matrix(dataset, k, cfg))
            .collect::<Result<_>>()?;
        Ok(KernelSet { matrices })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dataset_size(&self) -> usize {
        self.matrices.first().map_or(0, KernelMatrix::len)
    }

    pub fn slices(&self, indices: &[usize]) -> Result<Vec<Matrix>> {
        self.matrices.iter().map(|k| batch_slice(k, indices)).collect()
    }
}
