//! Undirected graphs and the spectral operators built on them.

use rand_distr::{Distribution, Normal};

use crate::eigen::{eigendecompose, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseMatrix};
use crate::rng;

/// Immutable simple undirected graph with optional categorical node labels
/// and an optional `n × d` node feature matrix.
///
/// Edges are stored once, as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    node_labels: Option<Vec<i64>>,
    features: Option<Matrix>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Rejects self-loops, duplicate edges (in either orientation) and
    /// endpoints `>= n`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) has an endpoint >= {n}")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &canon {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: canon,
            node_labels: None,
            features: None,
            neighbors,
        })
    }

    pub fn with_node_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn empty(n: usize) -> Self {
        Graph::new(n, []).expect("edgeless graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i - 1, i))).expect("path is valid")
    }

    /// Cycle on `n >= 3` nodes.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle is valid")
    }

    pub fn complete(n: usize) -> Self {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("complete graph is valid")
    }

    pub fn star(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (0, i))).expect("star is valid")
    }

    /// Disjoint union; labels and features are kept only when every part
    /// has them.
    pub fn disjoint_union(parts: &[Graph]) -> Result<Self> {
        let n = parts.iter().map(|g| g.n).sum();
        let mut edges = Vec::new();
        let mut offset = 0;
        for g in parts {
            edges.extend(g.edges.iter().map(|&(a, b)| (a + offset, b + offset)));
            offset += g.n;
        }
        let mut out = Graph::new(n, edges)?;
        if parts.iter().all(|g| g.node_labels.is_some()) {
            let labels = parts.iter().flat_map(|g| g.node_labels.clone().unwrap()).collect();
            out = out.with_node_labels(labels)?;
        }
        if !parts.is_empty() && parts.iter().all(|g| g.features.is_some()) {
            let feats: Vec<&Matrix> = parts.iter().map(|g| g.features.as_ref().unwrap()).collect();
            out = out.with_features(Matrix::vstack(&feats)?)?;
        }
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_labels(&self) -> Option<&[i64]> {
        self.node_labels.as_deref()
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Node labels when present, otherwise degrees.
    pub fn labels_or_degrees(&self) -> Vec<i64> {
        match &self.node_labels {
            Some(l) => l.clone(),
            None => self.degrees().into_iter().map(|d| d as i64).collect(),
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Component id per node (ids in order of lowest member) and the
    /// number of components.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }
}

/// `L = D − A`.
pub fn laplacian(g: &Graph) -> Matrix {
    let mut l = g.adjacency().scale(-1.0);
    for v in 0..g.node_count() {
        l[(v, v)] = g.degree(v) as f64;
    }
    l
}

fn inv_sqrt_degrees(g: &Graph) -> Vec<f64> {
    g.degrees()
        .into_iter()
        .map(|d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect()
}

/// `D^{-1/2} A D^{-1/2}` with `0/0` read as 0 for isolated nodes.
pub fn normalized_adjacency(g: &Graph) -> Matrix {
    let s = inv_sqrt_degrees(g);
    let mut m = Matrix::zeros(g.node_count(), g.node_count());
    for &(i, j) in g.edges() {
        let v = s[i] * s[j];
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// Normalized symmetric Laplacian `I − D^{-1/2} A D^{-1/2}`.
pub fn normalized_laplacian(g: &Graph) -> Matrix {
    let mut m = normalized_adjacency(g).scale(-1.0);
    for v in 0..g.node_count() {
        m[(v, v)] = 1.0;
    }
    m
}

/// Graph convolution filter `D^{-1/2} A D^{-1/2} + I`.
pub fn conv_filter(g: &Graph) -> Matrix {
    let mut m = normalized_adjacency(g);
    for v in 0..g.node_count() {
        m[(v, v)] += 1.0;
    }
    m
}

/// [`conv_filter`] in sparse form.
pub fn conv_filter_sparse(g: &Graph) -> SparseMatrix {
    let s = inv_sqrt_degrees(g);
    let mut t = Vec::with_capacity(g.node_count() + 2 * g.edge_count());
    for v in 0..g.node_count() {
        t.push((v, v, 1.0));
    }
    for &(i, j) in g.edges() {
        let v = s[i] * s[j];
        t.push((i, j, v));
        t.push((j, i, v));
    }
    SparseMatrix::from_triplets(g.node_count(), g.node_count(), t)
}

/// `n × d` matrix of i.i.d. `N(0, σ²)` draws from ChaCha20 keyed by `seed`
/// (see [`crate::rng`]). Normal variates use the ziggurat sampler of
/// `rand_distr`, which is deterministic given the generator output.
pub fn gaussian_features(n: usize, d: usize, sigma: f64, seed: u64) -> Result<Matrix> {
    gaussian_features_stream(n, d, sigma, seed, 0)
}

/// [`gaussian_features`] drawing from stream `stream` of `seed`.
pub fn gaussian_features_stream(n: usize, d: usize, sigma: f64, seed: u64, stream: u64) -> Result<Matrix> {
    if d < 1 {
        return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("bad sigma {sigma}: {e}")))?;
    let mut r = rng::stream(seed, stream);
    let data = (0..n * d).map(|_| normal.sample(&mut r)).collect();
    Matrix::from_vec(n, d, data)
}

/// Spectral node embedding: the `k` Laplacian eigenvectors following the
/// first (lowest-eigenvalue) one, each scaled by its eigenvalue and
/// sign-fixed so that its largest-magnitude entry is positive (ties go to
/// the lowest node index).
pub fn spectral_node_features(g: &Graph, k: usize) -> Result<Matrix> {
    let d = eigendecompose(&laplacian(g))?;
    spectral_features_from(&d, k)
}

/// [`spectral_node_features`] from a precomputed Laplacian decomposition.
pub fn spectral_features_from(d: &SpectralDecomposition, k: usize) -> Result<Matrix> {
    let n = d.len();
    if k < 1 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n-1 nontrivial eigenvectors, got k={k} for n={n}"
        )));
    }
    let u = &d.eigenvectors;
    let mut out = Matrix::zeros(n, k);
    for c in 0..k {
        let col = c + 1;
        let lambda = d.eigenvalues[col];
        let mut pivot = 0;
        for r in 1..n {
            if u[(r, col)].abs() > u[(pivot, col)].abs() {
                pivot = r;
            }
        }
        let sign = if u[(pivot, col)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            out[(r, c)] = sign * lambda * u[(r, col)];
        }
    }
    Ok(out)
}

/// Relabels node `i` as `perm[i]`: `A' = P A Pᵀ`, feature row `i` moves to
/// row `perm[i]`.
pub fn permute(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let n = g.node_count();
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} for {} nodes",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(format!(
                "{perm:?} is not a bijection on 0..{n}"
            )));
        }
        seen[p] = true;
    }
    let mut out = Graph::new(n, g.edges().iter().map(|&(a, b)| (perm[a], perm[b])))?;
    if let Some(labels) = g.node_labels() {
        let mut l = vec![0; n];
        for (i, &v) in labels.iter().enumerate() {
            l[perm[i]] = v;
        }
        out = out.with_node_labels(l)?;
    }
    if let Some(x) = g.features() {
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        out = out.with_features(x.select_rows(&inv))?;
    }
    Ok(out)
}

/// Inverse of a permutation given as `perm[i] = new index of i`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}
