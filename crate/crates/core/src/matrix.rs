//! Dense row-major node feature matrix.

use crate::error::{DgcError, Result};

/// `n x d` row-major matrix of node features. Row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![0.0; n * d] }
    }

    pub fn from_vec(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(DgcError::DimensionMismatch(format!(
                "{} values for a {n}x{d} matrix",
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            assert_eq!(r.len(), d, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { n, d, data }
    }

    pub fn column(values: &[f64]) -> Self {
        Self { n: values.len(), d: 1, data: values.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - other||_F`. Panics if shapes differ.
    pub fn distance(&self, other: &FeatureMatrix) -> f64 {
        assert_eq!((self.n, self.d), (other.n, other.d), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &FeatureMatrix) -> f64 {
        assert_eq!((self.n, self.d), (other.n, other.d), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Dense product `self * rhs` where `rhs` is `d x c` row-major.
    pub fn matmul(&self, rhs: &[f64], c: usize) -> FeatureMatrix {
        assert_eq!(rhs.len(), self.d * c, "rhs shape mismatch");
        let mut out = FeatureMatrix::zeros(self.n, c);
        for i in 0..self.n {
            let xi = self.row(i);
            let oi = out.row_mut(i);
            for (k, &x) in xi.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let rk = &rhs[k * c..(k + 1) * c];
                for (o, &r) in oi.iter_mut().zip(rk) {
                    *o += x * r;
                }
            }
        }
        out
    }

    /// Rows selected by `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { n: idx.len(), d: self.d, data }
    }
}
