//! Sparse graph storage, symmetric normalization and the Laplacian operator.
//!
//! A [`SparseGraph`] is a symmetric weighted adjacency in CSR form with
//! column indices sorted inside each row. [`normalize`] turns it into a
//! [`PropagationMatrix`] `S = D^{-1/2} A D^{-1/2}`, either with self-loops
//! added first (`aug`, the operator used by SGC) or without (`sym`).
//! The Laplacian `L = I - S` is never stored; [`LaplacianHandle`] applies
//! it as `X - S X`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DgcError, Result};
use crate::matrix::FeatureMatrix;

/// Symmetric weighted adjacency in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseGraph {
    /// Wraps raw CSR arrays after checking every structural invariant:
    /// row pointers, column range, sorted unique columns, and exact symmetry.
    pub fn from_csr(n: usize, rows: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Result<Self> {
        if rows.len() != n + 1 || rows[0] != 0 || rows[n] != cols.len() || cols.len() != vals.len() {
            return Err(DgcError::SchemaViolation("inconsistent CSR array lengths".into()));
        }
        for i in 0..n {
            if rows[i] > rows[i + 1] {
                return Err(DgcError::SchemaViolation("row pointers decrease".into()));
            }
            let row = &cols[rows[i]..rows[i + 1]];
            for (k, &j) in row.iter().enumerate() {
                if j >= n {
                    return Err(DgcError::IndexOutOfRange { index: j, n });
                }
                if k > 0 && row[k - 1] >= j {
                    if row[k - 1] == j {
                        return Err(DgcError::DuplicateEdge { src: i, dst: j });
                    }
                    return Err(DgcError::SchemaViolation(format!("row {i} columns not sorted")));
                }
            }
        }
        let g = Self { n, rows, cols, vals };
        for i in 0..n {
            for (j, w) in g.neighbors(i) {
                if g.weight(j, i) != Some(w) {
                    return Err(DgcError::SchemaViolation(format!("entry ({i}, {j}) has no mirror")));
                }
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries, i.e. twice the undirected edge count
    /// plus any diagonal entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.rows
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.rows[i]..self.rows[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.rows[i]..self.rows[i + 1];
        self.cols[r.clone()].binary_search(&j).ok().map(|k| self.vals[r.start + k])
    }

    /// Weighted degree `sum_j a_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.vals[self.rows[i]..self.rows[i + 1]].iter().sum()
    }

    /// Undirected off-diagonal edges `(i, j, w)` with `i < j`, in row order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Row-major dense copy, for small graphs and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                out[i * self.n + j] = w;
            }
        }
        out
    }
}

/// Builds a symmetric CSR graph from an undirected edge list that names each
/// pair once. Self-loops, duplicate pairs (in either orientation), bad
/// indices and non-positive weights are rejected.
pub fn build_graph(edges: &[(usize, usize, f64)], n: usize) -> Result<SparseGraph> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(src, dst, weight) in edges {
        for index in [src, dst] {
            if index >= n {
                return Err(DgcError::IndexOutOfRange { index, n });
            }
        }
        if src == dst {
            return Err(DgcError::SelfLoop(src));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(DgcError::NonPositiveWeight { src, dst, weight });
        }
        adj[src].push((dst, weight));
        adj[dst].push((src, weight));
    }

    let mut rows = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * edges.len());
    let mut vals = Vec::with_capacity(2 * edges.len());
    rows.push(0);
    for (i, row) in adj.iter_mut().enumerate() {
        row.sort_by_key(|&(j, _)| j);
        for w in row.windows(2) {
            if w[0].0 == w[1].0 {
                let (a, b) = (i.min(w[0].0), i.max(w[0].0));
                return Err(DgcError::DuplicateEdge { src: a, dst: b });
            }
        }
        for &(j, w) in row.iter() {
            cols.push(j);
            vals.push(w);
        }
        rows.push(cols.len());
    }
    Ok(SparseGraph { n, rows, cols, vals })
}

/// Which normalized adjacency to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `D~^{-1/2} (A + I) D~^{-1/2}`
    Aug,
    /// `D^{-1/2} A D^{-1/2}`
    Sym,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Aug => "aug",
            Variant::Sym => "sym",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Aug => 0,
            Variant::Sym => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Variant::Aug),
            1 => Some(Variant::Sym),
            _ => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "aug" => Ok(Variant::Aug),
            "sym" => Ok(Variant::Sym),
            other => Err(format!("unknown laplacian variant '{other}' (expected aug|sym)")),
        }
    }
}

/// Symmetrically normalized adjacency `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    kind: Variant,
    matrix: SparseGraph,
    degrees: Vec<f64>,
}

/// Normalizes `g` into `S`. For `Aug` a unit self-loop is added to every node
/// before computing degrees, so isolated nodes are allowed; `Sym` requires
/// every node to have positive degree.
pub fn normalize(g: &SparseGraph, variant: Variant) -> Result<PropagationMatrix> {
    let n = g.num_nodes();
    let loop_w = match variant {
        Variant::Aug => 1.0,
        Variant::Sym => 0.0,
    };
    let degrees: Vec<f64> = (0..n).map(|i| g.degree(i) + loop_w).collect();
    if variant == Variant::Sym {
        if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(DgcError::IsolatedNodeWithSymVariant(i));
        }
    }

    let extra = if variant == Variant::Aug { n } else { 0 };
    let mut rows = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(g.nnz() + extra);
    let mut vals = Vec::with_capacity(g.nnz() + extra);
    rows.push(0);
    for i in 0..n {
        let mut diag_done = variant == Variant::Sym;
        for (j, w) in g.neighbors(i) {
            if !diag_done && j > i {
                cols.push(i);
                vals.push(loop_w / degrees[i]);
                diag_done = true;
            }
            cols.push(j);
            vals.push(w / (degrees[i] * degrees[j]).sqrt());
        }
        if !diag_done {
            cols.push(i);
            vals.push(loop_w / degrees[i]);
        }
        rows.push(cols.len());
    }
    Ok(PropagationMatrix {
        kind: variant,
        matrix: SparseGraph { n, rows, cols, vals },
        degrees,
    })
}

impl PropagationMatrix {
    pub fn kind(&self) -> Variant {
        self.kind
    }

    pub fn self_loop_included(&self) -> bool {
        self.kind == Variant::Aug
    }

    pub fn matrix(&self) -> &SparseGraph {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.n
    }

    /// Degrees used for normalization (self-loop included for `Aug`).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// The fixed point of `S`: `v_i = sqrt(d_i)` satisfies `S v = v`.
    pub fn equilibrium_vector(&self) -> Vec<f64> {
        self.degrees.iter().map(|d| d.sqrt()).collect()
    }

    pub fn laplacian(&self) -> LaplacianHandle<'_> {
        LaplacianHandle { propagation: self }
    }

    /// `out = alpha * x + beta * (S x)`, row-parallel. Each output row is
    /// reduced in CSR column order, so results are independent of thread count.
    pub fn affine_into(&self, x: &FeatureMatrix, alpha: f64, beta: f64, out: &mut FeatureMatrix) {
        let d = x.cols();
        debug_assert_eq!(x.rows(), self.num_nodes());
        debug_assert_eq!((out.rows(), out.cols()), (x.rows(), d));
        let (rows, cols, vals) = (&self.matrix.rows, &self.matrix.cols, &self.matrix.vals);
        let xs = x.as_slice();
        let body = |(i, orow): (usize, &mut [f64])| {
            orow.fill(0.0);
            for k in rows[i]..rows[i + 1] {
                let w = vals[k];
                let xj = &xs[cols[k] * d..(cols[k] + 1) * d];
                for (o, &v) in orow.iter_mut().zip(xj) {
                    *o += w * v;
                }
            }
            if alpha == 0.0 {
                if beta != 1.0 {
                    orow.iter_mut().for_each(|o| *o *= beta);
                }
            } else {
                let xi = &xs[i * d..(i + 1) * d];
                for (o, &v) in orow.iter_mut().zip(xi) {
                    *o = alpha * v + beta * *o;
                }
            }
        };
        if d == 0 {
            return;
        }
        if self.num_nodes() * d < 4096 {
            out.as_mut_slice().chunks_mut(d).enumerate().for_each(body);
        } else {
            out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(body);
        }
    }

    /// `S x` into a fresh matrix.
    pub fn apply(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(x.rows(), x.cols());
        self.affine_into(x, 0.0, 1.0, &mut out);
        out
    }
}

/// `L = I - S`, applied matrix-free.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianHandle<'a> {
    propagation: &'a PropagationMatrix,
}

impl<'a> LaplacianHandle<'a> {
    pub fn propagation(&self) -> &'a PropagationMatrix {
        self.propagation
    }

    pub fn num_nodes(&self) -> usize {
        self.propagation.num_nodes()
    }

    /// `L x = x - S x`.
    pub fn apply(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(x.rows(), x.cols());
        self.propagation.affine_into(x, 1.0, -1.0, &mut out);
        out
    }

    /// Row-major dense `I - S`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.num_nodes();
        let mut out = self.propagation.matrix.to_dense();
        for v in out.iter_mut() {
            *v = -*v;
        }
        for i in 0..n {
            out[i * n + i] += 1.0;
        }
        out
    }
}

/// Result of [`spectral_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of `L` (its spectral norm, since `L` is symmetric PSD)
/// by power iteration with a Rayleigh-quotient stopping rule:
/// stop once two consecutive estimates differ by at most `tol * estimate`.
pub fn spectral_norm(l: &LaplacianHandle<'_>, tol: f64, max_iter: usize) -> SpectralNorm {
    let n = l.num_nodes();
    if n == 0 {
        return SpectralNorm { value: 0.0, iterations: 0, converged: true };
    }
    // deterministic, sign-varied start so no eigenvector is missed by symmetry
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let start: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let mut v = FeatureMatrix::column(&start);
    let norm = v.frobenius_norm();
    v.as_mut_slice().iter_mut().for_each(|x| *x /= norm);

    let mut estimate = 0.0;
    let mut w = FeatureMatrix::zeros(n, 1);
    for it in 1..=max_iter.max(1) {
        l.propagation.affine_into(&v, 1.0, -1.0, &mut w);
        let rayleigh: f64 = v.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        let wn = w.frobenius_norm();
        if wn == 0.0 {
            return SpectralNorm { value: 0.0, iterations: it, converged: true };
        }
        let done = it > 1 && (rayleigh - estimate).abs() <= tol * rayleigh.abs();
        estimate = rayleigh;
        if done {
            return SpectralNorm { value: estimate, iterations: it, converged: true };
        }
        for (a, b) in v.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *a = b / wn;
        }
    }
    SpectralNorm { value: estimate, iterations: max_iter.max(1), converged: false }
}
