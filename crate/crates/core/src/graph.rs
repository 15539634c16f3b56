//! Graphs, their self-looped symmetric normalization and node datasets.
//!
//! For adjacency `A` and degrees `D`, the propagation matrix is
//! `P̃ = D̃^{−1/2} (A + I) D̃^{−1/2}` with `D̃ = D + I`, and the normalized
//! Laplacian is `Δ̃ = I − P̃`. Both are stored in CSR form.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::Matrix;

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= n {
                return Err(Error::Index { index: r, bound: n });
            }
            if c >= n {
                return Err(Error::Index { index: c, bound: n });
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self { n, indptr, indices, values })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            bail!(Dimension, "vector of length {} against {} nodes", x.len(), self.n);
        }
        Ok((0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    /// `self · X` for a dense `n × m` matrix.
    pub fn mul_dense(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            bail!(Dimension, "dense operand has {} rows, graph has {} nodes", x.rows(), self.n);
        }
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                for (o, s) in out.row_mut(r).iter_mut().zip(x.row(c)) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · X`.
    pub fn mul_dense_transposed(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            bail!(Dimension, "dense operand has {} rows, graph has {} nodes", x.rows(), self.n);
        }
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                for (o, s) in out.row_mut(c).iter_mut().zip(x.row(r)) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }
}

/// `P̃ = D̃^{−1/2}(A+I)D̃^{−1/2}`.
///
/// Edges are undirected; duplicates are merged and input self-loops are
/// ignored because the construction adds exactly one per node.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Result<Csr> {
    let edges = canonical_edges(n, edges)?;
    Ok(normalize(n, &edges))
}

fn canonical_edges(n: usize, edges: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for &(u, v) in edges {
        for x in [u, v] {
            if x >= n {
                return Err(Error::Index { index: x, bound: n });
            }
        }
        if u != v {
            set.insert((u.min(v), u.max(v)));
        }
    }
    Ok(set.into_iter().collect())
}

fn normalize(n: usize, edges: &[(usize, usize)]) -> Csr {
    let mut degree = vec![1.0; n];
    for &(u, v) in edges {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let mut trip = Vec::with_capacity(n + 2 * edges.len());
    for (i, d) in degree.iter().enumerate() {
        trip.push((i, i, 1.0 / d));
    }
    for &(u, v) in edges {
        let w = 1.0 / libm::sqrt(degree[u] * degree[v]);
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    Csr::from_triplets(n, trip).expect("indices validated")
}

/// Default node-count cap for dense eigen-solves.
pub const DENSE_LIMIT: usize = 5_000;
/// Eigenvalues at or below this are treated as zero.
pub const EIGEN_ZERO_TOL: f64 = 1e-8;

/// Smallest non-zero eigenvalue of a symmetric Laplacian, by dense solve.
pub fn spectral_gap(laplacian: &Csr, limit: usize) -> Result<f64> {
    if laplacian.n() > limit {
        bail!(Capability, "dense eigen-solve refused for {} nodes (limit {limit})", laplacian.n());
    }
    let ev = laplacian.to_dense().symmetric_eigenvalues()?;
    ev.into_iter()
        .find(|&l| l > EIGEN_ZERO_TOL)
        .ok_or_else(|| Error::Numeric(alloc::string::String::from("Laplacian has no non-zero eigenvalue")))
}

/// Undirected graph with its normalized operators.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj_norm: Arc<Csr>,
    laplacian_norm: Arc<Csr>,
}

impl SparseGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let edges = canonical_edges(n, edges)?;
        let adj = normalize(n, &edges);
        let mut trip = Vec::with_capacity(adj.nnz() + n);
        for i in 0..n {
            trip.push((i, i, 1.0));
            for (j, v) in adj.row(i) {
                trip.push((i, j, -v));
            }
        }
        let lap = Csr::from_triplets(n, trip)?;
        Ok(Self { n, edges, adj_norm: Arc::new(adj), laplacian_norm: Arc::new(lap) })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Deduplicated undirected edges with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adj_norm(&self) -> &Arc<Csr> {
        &self.adj_norm
    }

    pub fn laplacian_norm(&self) -> &Csr {
        &self.laplacian_norm
    }

    pub fn spectral_gap(&self) -> Result<f64> {
        spectral_gap(&self.laplacian_norm, DENSE_LIMIT)
    }

    /// Relabel nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            bail!(Dimension, "permutation of length {} for {} nodes", perm.len(), self.n);
        }
        let edges: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::new(self.n, &edges)
    }
}

/// Transductive train/validation/test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// A graph with node features, labels and splits.
#[derive(Debug, Clone)]
pub struct NodeDataset {
    pub graph: SparseGraph,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
}

impl NodeDataset {
    /// Checks row counts, label range and split disjointness.
    pub fn new(graph: SparseGraph, features: Matrix, labels: Vec<usize>, splits: Splits) -> Result<Self> {
        let n = graph.n();
        if features.rows() != n {
            bail!(Dimension, "{} feature rows for {n} nodes", features.rows());
        }
        if labels.len() != n {
            bail!(Dimension, "{} labels for {n} nodes", labels.len());
        }
        if !features.is_finite() {
            bail!(Numeric, "features contain non-finite values");
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n];
        for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
            if i >= n {
                return Err(Error::Index { index: i, bound: n });
            }
            if seen[i] {
                bail!(Config, "node {i} appears in more than one split");
            }
            seen[i] = true;
        }
        Ok(Self { graph, features, labels, num_classes, splits })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.n()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }
}
