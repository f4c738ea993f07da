//! Spectral-distance histograms.
//!
//! The harmonic distance between nodes `x` and `y` is
//! `S(x, y) = Σ_{λ_k > 0} f(λ_k) (φ_k(x) − φ_k(y))²` with `f(λ) = 1/λ`
//! (the biharmonic variant uses `1/λ²`). Since the sum runs over one
//! Laplacian eigenbasis it equals `(e_x − e_y)ᵀ f(L)⁺ (e_x − e_y)`, which is
//! independent of the basis chosen inside degenerate eigenspaces.
//!
//! Every unordered node pair contributes one count to a histogram of
//! `bins` equal-width bins over `[0, range_max]` plus a trailing overflow
//! bin, which also receives pairs lying in different components.

use serde::{Deserialize, Serialize};

use crate::eigen::eigendecompose;
use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};

/// Eigenvalues below this are treated as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FgsdVariant {
    #[default]
    Harmonic,
    Biharmonic,
}

impl FgsdVariant {
    fn weight(self, lambda: f64) -> f64 {
        match self {
            FgsdVariant::Harmonic => 1.0 / lambda,
            FgsdVariant::Biharmonic => 1.0 / (lambda * lambda),
        }
    }
}

/// Pairwise spectral distances, row-major `n × n`; `None` for pairs in
/// different components.
pub fn spectral_distances(g: &Graph, variant: FgsdVariant) -> Result<Vec<Option<f64>>> {
    let n = g.node_count();
    let d = eigendecompose(&laplacian(g))?;
    let (comp, _) = g.connected_components();
    let u = &d.eigenvectors;
    let mut out = vec![None; n * n];
    for x in 0..n {
        out[x * n + x] = Some(0.0);
        for y in x + 1..n {
            if comp[x] != comp[y] {
                continue;
            }
            let mut s = 0.0;
            for (k, &lambda) in d.eigenvalues.iter().enumerate() {
                if lambda < ZERO_EIGENVALUE {
                    continue;
                }
                let diff = u[(x, k)] - u[(y, k)];
                s += variant.weight(lambda) * diff * diff;
            }
            let s = s.max(0.0);
            out[x * n + y] = Some(s);
            out[y * n + x] = Some(s);
        }
    }
    Ok(out)
}

/// Relative slack (in bins) within which a distance counts as lying exactly
/// on a bin edge. Keeps isomorphic graphs in identical bins despite
/// eigensolver rounding.
const BIN_EDGE_SNAP: f64 = 1e-9;

fn bin_position(q: f64) -> f64 {
    let r = q.round();
    if (q - r).abs() < BIN_EDGE_SNAP {
        r
    } else {
        q.floor()
    }
}

/// Harmonic spectral-distance histogram of length `bins + 1`.
pub fn fgsd_features(g: &Graph, bins: usize, range_max: f64) -> Result<Vec<f64>> {
    fgsd_features_with(g, bins, range_max, FgsdVariant::Harmonic)
}

pub fn fgsd_features_with(g: &Graph, bins: usize, range_max: f64, variant: FgsdVariant) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("fgsd bins must be >= 2, got {bins}")));
    }
    if !(range_max > 0.0 && range_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fgsd range_max must be positive, got {range_max}"
        )));
    }
    let n = g.node_count();
    let dist = spectral_distances(g, variant)?;
    let width = range_max / bins as f64;
    let mut hist = vec![0.0; bins + 1];
    for x in 0..n {
        for y in x + 1..n {
            let bin = match dist[x * n + y] {
                Some(s) if s <= range_max + BIN_EDGE_SNAP * width => (bin_position(s / width) as usize).min(bins - 1),
                _ => bins,
            };
            hist[bin] += 1.0;
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::permute;

    #[test]
    fn k2_distance_is_one() {
        let d = spectral_distances(&Graph::complete(2), FgsdVariant::Harmonic).unwrap();
        assert!((d[1].unwrap() - 1.0).abs() < 1e-12);
        let h = fgsd_features(&Graph::complete(2), 200, 10.0).unwrap();
        assert_eq!(h.len(), 201);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
        // 1.0 lies in bin floor(1.0 / 0.05) = 20.
        assert_eq!(h[20], 1.0);
        let p = permute(&Graph::complete(2), &[1, 0]).unwrap();
        assert_eq!(fgsd_features(&p, 200, 10.0).unwrap(), h);
    }

    #[test]
    fn complete_graph_distances_equal() {
        // Oracle: for K_n, L⁺ = (I − J/n)/n so every pair has S = 2/n.
        for n in 3..6 {
            let d = spectral_distances(&Graph::complete(n), FgsdVariant::Harmonic).unwrap();
            for x in 0..n {
                for y in x + 1..n {
                    assert!((d[x * n + y].unwrap() - 2.0 / n as f64).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn cycle_distances_are_effective_resistances() {
        // Oracle: on C_n the harmonic distance is the effective resistance
        // k(n−k)/n between nodes k hops apart.
        let n = 6;
        let d = spectral_distances(&Graph::cycle(n), FgsdVariant::Harmonic).unwrap();
        for y in 1..n {
            let k = y as f64;
            assert!((d[y].unwrap() - k * (n as f64 - k) / n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn cross_component_pairs_overflow() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let h = fgsd_features(&g, 4, 2.0).unwrap();
        assert_eq!(h[4], 4.0);
        assert_eq!(h.iter().sum::<f64>(), 6.0);
        assert!(fgsd_features(&g, 1, 2.0).is_err());
    }
}
