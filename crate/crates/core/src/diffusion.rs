//! Feature propagation as fixed-step integration of the graph heat equation
//! `dX/dt = -L X`, `L = I - S`.
//!
//! Three integrators are provided:
//!
//! * [`sgc_propagate`]: `S^K X`, which is forward Euler with the step pinned
//!   at `dt = 1` (so terminal time equals the step count);
//! * [`euler_propagate`]: `K` forward-Euler steps of size `dt = T / K`, each
//!   `X <- (1 - dt) X + dt S X`;
//! * [`rk4_propagate`]: classical fourth-order Runge-Kutta with the same
//!   decoupled `(T, K)`.
//!
//! All three run on the same fused sparse kernel
//! [`PropagationMatrix::affine_into`], accumulate in `f64`, and are pure.

use serde::{Deserialize, Serialize};

use crate::error::{DgcError, Result};
use crate::graph::{PropagationMatrix, Variant};
pub use crate::matrix::FeatureMatrix;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sgc,
    Euler,
    Rk4,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sgc => "sgc",
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Scheme::Sgc => 0,
            Scheme::Euler => 1,
            Scheme::Rk4 => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Scheme::Sgc),
            1 => Some(Scheme::Euler),
            2 => Some(Scheme::Rk4),
            _ => None,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sgc" => Ok(Scheme::Sgc),
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(format!("unknown scheme '{other}' (expected sgc|euler|rk4)")),
        }
    }
}

/// Scheme, Laplacian variant, terminal time and step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub scheme: Scheme,
    pub variant: Variant,
    #[serde(rename = "T")]
    pub terminal_time: f64,
    #[serde(rename = "K")]
    pub steps: usize,
}

impl DiffusionConfig {
    /// SGC with `K` steps; terminal time is tied to `K`.
    pub fn sgc(steps: usize) -> Self {
        Self { scheme: Scheme::Sgc, variant: Variant::Aug, terminal_time: steps as f64, steps }
    }

    pub fn euler(terminal_time: f64, steps: usize) -> Self {
        Self { scheme: Scheme::Euler, variant: Variant::Aug, terminal_time, steps }
    }

    pub fn rk4(terminal_time: f64, steps: usize) -> Self {
        Self { scheme: Scheme::Rk4, variant: Variant::Aug, terminal_time, steps }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn step_size(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.terminal_time / self.steps as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            Scheme::Sgc => {
                if self.terminal_time != self.steps as f64 {
                    return Err(DgcError::InvalidConfig(format!(
                        "sgc couples T to K (got T={}, K={})",
                        self.terminal_time, self.steps
                    )));
                }
            }
            Scheme::Euler | Scheme::Rk4 => check_time_steps(self.variant, self.terminal_time, self.steps)?,
        }
        Ok(())
    }
}

fn check_time_steps(variant: Variant, t: f64, k: usize) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(DgcError::InvalidConfig(format!("terminal time must be finite and >= 0, got {t}")));
    }
    if t > 0.0 && k == 0 {
        return Err(DgcError::InvalidConfig("K = 0 with T > 0".into()));
    }
    if variant == Variant::Sym && k > 0 {
        let dt = t / k as f64;
        if dt > 1.0 {
            return Err(DgcError::UnstableStepSize { dt });
        }
    }
    Ok(())
}

fn check_dims(x: &FeatureMatrix, s: &PropagationMatrix) -> Result<()> {
    if x.rows() != s.num_nodes() {
        return Err(DgcError::DimensionMismatch(format!(
            "features have {} rows, graph has {} nodes",
            x.rows(),
            s.num_nodes()
        )));
    }
    Ok(())
}

/// `S^k X`.
pub fn sgc_propagate(x: &FeatureMatrix, s: &PropagationMatrix, k: usize) -> Result<FeatureMatrix> {
    check_dims(x, s)?;
    Ok(repeat_affine(x, s, 0.0, 1.0, k))
}

/// `k` forward-Euler steps of size `T / k`.
pub fn euler_propagate(x: &FeatureMatrix, s: &PropagationMatrix, t: f64, k: usize) -> Result<FeatureMatrix> {
    check_dims(x, s)?;
    check_time_steps(s.kind(), t, k)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let dt = t / k as f64;
    Ok(repeat_affine(x, s, 1.0 - dt, dt, k))
}

fn repeat_affine(x: &FeatureMatrix, s: &PropagationMatrix, alpha: f64, beta: f64, k: usize) -> FeatureMatrix {
    let mut cur = x.clone();
    if k == 0 {
        return cur;
    }
    let mut next = FeatureMatrix::zeros(x.rows(), x.cols());
    for _ in 0..k {
        s.affine_into(&cur, alpha, beta, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// `k` classical RK4 steps of size `T / k` on `dX/dt = -L X`.
///
/// Stages: `R1 = X`, `R2 = X - dt/2 L R1`, `R3 = X - dt/2 L R2`,
/// `R4 = X - dt L R3`; update `X <- X - dt/6 L (R1 + 2 R2 + 2 R3 + R4)`.
pub fn rk4_propagate(x: &FeatureMatrix, s: &PropagationMatrix, t: f64, k: usize) -> Result<FeatureMatrix> {
    check_dims(x, s)?;
    check_time_steps(s.kind(), t, k)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let dt = t / k as f64;
    let (n, d) = (x.rows(), x.cols());
    let mut cur = x.clone();
    let mut stage = FeatureMatrix::zeros(n, d);
    let mut slope = FeatureMatrix::zeros(n, d);
    let mut acc = FeatureMatrix::zeros(n, d);

    for _ in 0..k {
        // slope = -L R = S R - R
        s.affine_into(&cur, -1.0, 1.0, &mut slope);
        acc.as_mut_slice().copy_from_slice(slope.as_slice());
        for (coef, weight) in [(0.5, 2.0), (0.5, 2.0), (1.0, 1.0)] {
            for ((st, &c), &sl) in stage.as_mut_slice().iter_mut().zip(cur.as_slice()).zip(slope.as_slice()) {
                *st = c + coef * dt * sl;
            }
            s.affine_into(&stage, -1.0, 1.0, &mut slope);
            for (a, &sl) in acc.as_mut_slice().iter_mut().zip(slope.as_slice()) {
                *a += weight * sl;
            }
        }
        let h = dt / 6.0;
        for (c, &a) in cur.as_mut_slice().iter_mut().zip(acc.as_slice()) {
            *c += h * a;
        }
    }
    Ok(cur)
}

/// Dispatches on `cfg.scheme`. The propagation matrix must have been built
/// with `cfg.variant`.
pub fn propagate(x: &FeatureMatrix, s: &PropagationMatrix, cfg: &DiffusionConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    if s.kind() != cfg.variant {
        return Err(DgcError::InvalidConfig(format!(
            "config asks for the {} Laplacian but the matrix is {}",
            cfg.variant.as_str(),
            s.kind().as_str()
        )));
    }
    match cfg.scheme {
        Scheme::Sgc => sgc_propagate(x, s, cfg.steps),
        Scheme::Euler => euler_propagate(x, s, cfg.terminal_time, cfg.steps),
        Scheme::Rk4 => rk4_propagate(x, s, cfg.terminal_time, cfg.steps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalize};
    use approx::assert_abs_diff_eq;

    fn two_node() -> PropagationMatrix {
        normalize(&build_graph(&[(0, 1, 1.0)], 2).unwrap(), Variant::Aug).unwrap()
    }

    fn e1() -> FeatureMatrix {
        FeatureMatrix::column(&[1.0, 0.0])
    }

    /// Closed-form heat kernel on the two-node aug graph.
    fn two_node_exact(t: f64) -> [f64; 2] {
        let e = (-t).exp();
        [(1.0 + e) / 2.0, (1.0 - e) / 2.0]
    }

    #[test]
    fn sgc_zero_steps_is_identity() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(sgc_propagate(&x, &two_node(), 0).unwrap(), x);
    }

    #[test]
    fn sgc_two_node() {
        let s = two_node();
        let y = sgc_propagate(&e1(), &s, 1).unwrap();
        assert_eq!(y.as_slice(), &[0.5, 0.5]);
        let y = sgc_propagate(&e1(), &s, 50).unwrap();
        assert_eq!(y.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_time_is_identity() {
        let s = two_node();
        assert_eq!(euler_propagate(&e1(), &s, 0.0, 7).unwrap(), e1());
        assert_eq!(euler_propagate(&e1(), &s, 0.0, 0).unwrap(), e1());
        assert_eq!(rk4_propagate(&e1(), &s, 0.0, 3).unwrap(), e1());
    }

    #[test]
    fn euler_unit_step_equals_sgc() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5)], 4).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.3], vec![-2.0, 1.0], vec![0.5, 0.5], vec![0.0, 9.0]]);
        for k in [1, 2, 5] {
            let a = euler_propagate(&x, &s, k as f64, k).unwrap();
            let b = sgc_propagate(&x, &s, k).unwrap();
            assert_eq!(a, b, "bitwise equality at k={k}");
        }
    }

    #[test]
    fn euler_converges_to_kernel() {
        let y = euler_propagate(&e1(), &two_node(), std::f64::consts::LN_2, 1024).unwrap();
        assert_abs_diff_eq!(y.get(0, 0), 0.75, epsilon = 1e-3);
        assert_abs_diff_eq!(y.get(1, 0), 0.25, epsilon = 1e-3);
    }

    #[test]
    fn rk4_two_node_t1_k4() {
        let y = rk4_propagate(&e1(), &two_node(), 1.0, 4).unwrap();
        let exact = two_node_exact(1.0);
        assert_abs_diff_eq!(y.get(0, 0), exact[0], epsilon = 1e-5);
        assert_abs_diff_eq!(y.get(1, 0), exact[1], epsilon = 1e-5);
        assert_abs_diff_eq!(exact[0], 0.6839, epsilon = 1e-4);
    }

    #[test]
    fn rk4_step_matches_taylor_polynomial() {
        // one RK4 step on a linear ODE is the degree-4 Taylor polynomial of e^{-hL}
        // on the lambda = 1 mode: 1 - h + h^2/2 - h^3/6 + h^4/24
        let h: f64 = 0.3;
        let y = rk4_propagate(&e1(), &two_node(), h, 1).unwrap();
        let p = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert_abs_diff_eq!(y.get(0, 0), (1.0 + p) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.get(1, 0), (1.0 - p) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn config_validation() {
        let s = two_node();
        assert!(matches!(euler_propagate(&e1(), &s, 1.0, 0), Err(DgcError::InvalidConfig(_))));
        assert!(matches!(euler_propagate(&e1(), &s, -1.0, 3), Err(DgcError::InvalidConfig(_))));
        let sym = normalize(&build_graph(&[(0, 1, 1.0)], 2).unwrap(), Variant::Sym).unwrap();
        assert!(matches!(euler_propagate(&e1(), &sym, 3.0, 2), Err(DgcError::UnstableStepSize { .. })));
        assert!(euler_propagate(&e1(), &sym, 2.0, 2).is_ok());
        assert!(matches!(rk4_propagate(&e1(), &sym, 3.0, 2), Err(DgcError::UnstableStepSize { .. })));
        // aug allows large steps
        assert!(euler_propagate(&e1(), &s, 3.0, 2).is_ok());

        let mut cfg = DiffusionConfig::sgc(2);
        cfg.terminal_time = 3.0;
        assert!(cfg.validate().is_err());
        assert!(propagate(&e1(), &sym, &DiffusionConfig::euler(1.0, 1)).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let x = FeatureMatrix::zeros(3, 1);
        let s = two_node();
        assert!(matches!(sgc_propagate(&x, &s, 1), Err(DgcError::DimensionMismatch(_))));
        assert!(matches!(euler_propagate(&x, &s, 1.0, 1), Err(DgcError::DimensionMismatch(_))));
        assert!(matches!(rk4_propagate(&x, &s, 1.0, 1), Err(DgcError::DimensionMismatch(_))));
    }

    #[test]
    fn dispatch() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![0.0], vec![2.0]]);
        assert_eq!(propagate(&x, &s, &DiffusionConfig::sgc(2)).unwrap(), sgc_propagate(&x, &s, 2).unwrap());
        assert_eq!(propagate(&x, &s, &DiffusionConfig::euler(1.0, 1)).unwrap(), sgc_propagate(&x, &s, 1).unwrap());
        assert_eq!(
            propagate(&x, &s, &DiffusionConfig::rk4(1.5, 3)).unwrap(),
            rk4_propagate(&x, &s, 1.5, 3).unwrap()
        );
    }

    #[test]
    fn large_features_take_parallel_path() {
        // wide enough to cross the sequential/parallel threshold; compare to narrow columns
        let edges: Vec<_> = (0..99).map(|i| (i, i + 1, 1.0)).collect();
        let s = normalize(&build_graph(&edges, 100).unwrap(), Variant::Aug).unwrap();
        let rows: Vec<Vec<f64>> = (0..100).map(|i| (0..64).map(|j| ((i * 31 + j * 7) % 13) as f64).collect()).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let wide = euler_propagate(&x, &s, 2.0, 10).unwrap();
        for j in [0, 17, 63] {
            let col: Vec<f64> = (0..100).map(|i| x.get(i, j)).collect();
            let narrow = euler_propagate(&FeatureMatrix::column(&col), &s, 2.0, 10).unwrap();
            for i in 0..100 {
                assert_eq!(wide.get(i, j), narrow.get(i, 0));
            }
        }
    }
}
