//! Dense spectral reference for the heat equation.
//!
//! Everything here works from a full eigendecomposition `L = U diag(lambda) U^T`
//! computed by Householder tridiagonalization followed by implicit QL with
//! Wilkinson-style shifts. It shares no code with the sparse integrators and is
//! what the integrators are checked against.

use crate::error::{DgcError, Result};
use crate::graph::PropagationMatrix;
use crate::matrix::FeatureMatrix;

/// Largest matrix order accepted by [`eigendecompose`].
pub const DENSE_LIMIT: usize = 2048;

/// Symmetric tolerance accepted on input.
const SYMMETRY_TOL: f64 = 1e-10;

/// Largest `t * lambda_max` allowed in [`inverse_diffusion`].
pub const INVERSE_GROWTH_LIMIT: f64 = 40.0;

/// `L = U diag(eigenvalues) U^T` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major; column `k` is the eigenvector of `eigenvalues[k]`.
    eigenvectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Component `i` of eigenvector `k`.
    #[inline]
    pub fn vector_component(&self, i: usize, k: usize) -> f64 {
        self.eigenvectors[i * self.n + k]
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.vector_component(i, k)).collect()
    }

    /// Row-major `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n)
                    .map(|k| self.vector_component(i, k) * self.eigenvalues[k] * self.vector_component(j, k))
                    .sum();
            }
        }
        out
    }

    /// `||U^T U - I||_F`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| self.vector_component(i, a) * self.vector_component(i, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                acc += (dot - want) * (dot - want);
            }
        }
        acc.sqrt()
    }

    /// `U diag(f(lambda)) U^T X`.
    pub fn apply_spectral<F: Fn(f64) -> f64>(&self, x: &FeatureMatrix, f: F) -> Result<FeatureMatrix> {
        let n = self.n;
        if x.rows() != n {
            return Err(DgcError::DimensionMismatch(format!(
                "features have {} rows, decomposition has order {n}",
                x.rows()
            )));
        }
        let d = x.cols();
        // coefficients in the eigenbasis, one row per eigenvector
        let mut coef = vec![0.0; n * d];
        for i in 0..n {
            let xi = x.row(i);
            for k in 0..n {
                let u = self.vector_component(i, k);
                if u == 0.0 {
                    continue;
                }
                for (c, &v) in coef[k * d..(k + 1) * d].iter_mut().zip(xi) {
                    *c += u * v;
                }
            }
        }
        for k in 0..n {
            let g = f(self.eigenvalues[k]);
            coef[k * d..(k + 1) * d].iter_mut().for_each(|c| *c *= g);
        }
        let mut out = FeatureMatrix::zeros(n, d);
        for i in 0..n {
            let oi = out.row_mut(i);
            for k in 0..n {
                let u = self.vector_component(i, k);
                for (o, &c) in oi.iter_mut().zip(&coef[k * d..(k + 1) * d]) {
                    *o += u * c;
                }
            }
        }
        Ok(out)
    }
}

/// Eigendecomposition of a dense symmetric `n x n` row-major matrix.
pub fn eigendecompose(matrix: &[f64], n: usize) -> Result<EigenDecomposition> {
    eigendecompose_with_limit(matrix, n, DENSE_LIMIT)
}

pub fn eigendecompose_with_limit(matrix: &[f64], n: usize, limit: usize) -> Result<EigenDecomposition> {
    if n > limit {
        return Err(DgcError::TooLargeForDenseOracle { n, limit });
    }
    if matrix.len() != n * n {
        return Err(DgcError::DimensionMismatch(format!("{} entries for order {n}", matrix.len())));
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((matrix[i * n + j] - matrix[j * n + i]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(DgcError::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(EigenDecomposition { n, eigenvalues: vec![], eigenvectors: vec![] });
    }

    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (matrix[i * n + j] + matrix[j * n + i])).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e);

    let mut eigenvectors = vec![0.0; n * n];
    for i in 0..n {
        eigenvectors[i * n..(i + 1) * n].copy_from_slice(&v[i]);
    }
    Ok(EigenDecomposition { n, eigenvalues: d, eigenvectors })
}

/// Eigendecomposition of `L = I - S` for a normalized graph.
pub fn laplacian_eigen(s: &PropagationMatrix) -> Result<EigenDecomposition> {
    let n = s.num_nodes();
    if n > DENSE_LIMIT {
        return Err(DgcError::TooLargeForDenseOracle { n, limit: DENSE_LIMIT });
    }
    eigendecompose(&s.laplacian().to_dense(), n)
}

/// Householder reduction to tridiagonal form, accumulating the orthogonal
/// transform in `v`. On exit `d` is the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);

            for j in 0..i {
                let f = d[j];
                v[j][i] = f;
                let mut g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`; rotations are applied to `v`.
/// Eigenvalues are returned ascending with columns of `v` permuted to match.
fn tridiagonal_ql(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter >= 300 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in v.iter_mut() {
                row.swap(i, k);
            }
        }
    }
}

/// `H_t X = U diag(e^{-lambda t}) U^T X`, the exact heat-equation solution.
pub fn exact_heat_kernel(eig: &EigenDecomposition, t: f64, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if !(t >= 0.0) {
        return Err(DgcError::InvalidConfig(format!("diffusion time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        if x.rows() != eig.order() {
            return Err(DgcError::DimensionMismatch(format!(
                "features have {} rows, decomposition has order {}",
                x.rows(),
                eig.order()
            )));
        }
        return Ok(x.clone());
    }
    eig.apply_spectral(x, |lambda| (-lambda * t).exp())
}

/// Runs the reverse diffusion `dX/dt = +L X` for time `t_star` from
/// `x_clean`: `U diag(e^{+lambda t}) U^T X_clean`.
pub fn inverse_diffusion(eig: &EigenDecomposition, t_star: f64, x_clean: &FeatureMatrix) -> Result<FeatureMatrix> {
    if !(t_star >= 0.0) {
        return Err(DgcError::InvalidConfig(format!("corruption time must be >= 0, got {t_star}")));
    }
    let growth = t_star * eig.max_eigenvalue();
    if growth > INVERSE_GROWTH_LIMIT {
        return Err(DgcError::OverflowRisk(growth));
    }
    if t_star == 0.0 {
        return exact_heat_kernel(eig, 0.0, x_clean);
    }
    eig.apply_spectral(x_clean, |lambda| (lambda * t_star).exp())
}

/// Upper bound on the forward-Euler global error after `k` steps to time `t`:
/// `t ||L|| ||X0|| / (2k) * (e^{t ||L||} - 1)`, with `||L||` the spectral
/// norm and `||X0||` the Frobenius norm.
pub fn euler_error_bound(t: f64, k: usize, norm_l: f64, norm_x0: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let tl = t * norm_l;
    tl * norm_x0 / (2.0 * k as f64) * tl.exp_m1()
}

/// Bound on the local error of one Euler step of size `h` taken from a point
/// of the exact trajectory: `h^2 / 2 * ||L||^2 * ||X0||`.
pub fn euler_local_error_bound(h: f64, norm_l: f64, norm_x0: f64) -> f64 {
    0.5 * h * h * norm_l * norm_l * norm_x0
}
