//! Multinomial logistic (softmax) regression trained full-batch.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::diffusion::DiffusionConfig;
use crate::error::{DgcError, Result};
use crate::matrix::FeatureMatrix;

/// Weight-decay candidates searched by [`tune_weight_decay`].
pub const WEIGHT_DECAY_GRID: [f64; 6] = [1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4];

/// Linear classifier `softmax(X theta + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    d: usize,
    c: usize,
    /// `d x c` row-major.
    theta: Vec<f64>,
    bias: Vec<f64>,
    use_bias: bool,
}

impl SoftmaxModel {
    pub fn zeros(d: usize, c: usize, use_bias: bool) -> Self {
        Self { d, c, theta: vec![0.0; d * c], bias: vec![0.0; c], use_bias }
    }

    pub fn from_parts(d: usize, c: usize, theta: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if theta.len() != d * c || bias.len() != c {
            return Err(DgcError::DimensionMismatch(format!(
                "theta has {} values and bias {} for d={d}, C={c}",
                theta.len(),
                bias.len()
            )));
        }
        let use_bias = bias.iter().any(|&b| b != 0.0);
        Ok(Self { d, c, theta, bias, use_bias })
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn uses_bias(&self) -> bool {
        self.use_bias
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols() != self.d {
            return Err(DgcError::DimensionMismatch(format!(
                "features have {} columns, model expects {}",
                x.cols(),
                self.d
            )));
        }
        Ok(())
    }

    /// Raw scores `X theta + bias`.
    pub fn logits(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_input(x)?;
        let mut z = x.matmul(&self.theta, self.c);
        if self.use_bias {
            for i in 0..z.rows() {
                for (v, b) in z.row_mut(i).iter_mut().zip(&self.bias) {
                    *v += b;
                }
            }
        }
        Ok(z)
    }
}

/// Row-wise softmax with max subtraction, in place.
fn softmax_rows(z: &mut FeatureMatrix) {
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Class probabilities, one row per node.
pub fn forward(m: &SoftmaxModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut z = m.logits(x)?;
    softmax_rows(&mut z);
    Ok(z)
}

/// Loss and its exact gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_theta: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

fn masked_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

fn check_labels(labels: &[usize], idx: &[usize], classes: usize) -> Result<()> {
    for &i in idx {
        if labels[i] >= classes {
            return Err(DgcError::LabelOutOfRange { label: labels[i], classes });
        }
    }
    Ok(())
}

/// Mean cross-entropy over the masked nodes plus `weight_decay / 2 * ||theta||_F^2`
/// (the bias is not decayed), with analytic gradients.
pub fn loss_and_grad(
    m: &SoftmaxModel,
    x: &FeatureMatrix,
    labels: &[usize],
    mask: &[bool],
    weight_decay: f64,
) -> Result<LossGrad> {
    m.check_input(x)?;
    if mask.len() != x.rows() || labels.len() != x.rows() {
        return Err(DgcError::DimensionMismatch("mask/labels length differs from node count".into()));
    }
    let idx = masked_indices(mask);
    if idx.is_empty() {
        return Err(DgcError::EmptyMask);
    }
    check_labels(labels, &idx, m.c)?;
    let xs = x.select_rows(&idx);
    let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    Ok(batch_loss_grad(m, &xs, &ys, weight_decay))
}

fn batch_loss_grad(m: &SoftmaxModel, xs: &FeatureMatrix, ys: &[usize], weight_decay: f64) -> LossGrad {
    let (d, c) = (m.d, m.c);
    let count = ys.len() as f64;
    let mut z = xs.matmul(&m.theta, c);
    let mut loss = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let row = z.row_mut(i);
        if m.use_bias {
            for (v, b) in row.iter_mut().zip(&m.bias) {
                *v += b;
            }
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[y] - lse;
        // row becomes (p - onehot) / count
        for (k, v) in row.iter_mut().enumerate() {
            let p = (*v - lse).exp();
            *v = (p - if k == y { 1.0 } else { 0.0 }) / count;
        }
    }
    loss /= count;
    loss += 0.5 * weight_decay * m.theta.iter().map(|t| t * t).sum::<f64>();

    let mut grad_theta: Vec<f64> = m.theta.iter().map(|t| weight_decay * t).collect();
    let mut grad_bias = vec![0.0; c];
    for i in 0..xs.rows() {
        let gi = z.row(i);
        for (k, &xv) in xs.row(i).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (g, &r) in grad_theta[k * c..(k + 1) * c].iter_mut().zip(gi) {
                *g += xv * r;
            }
        }
        if m.use_bias {
            for (g, &r) in grad_bias.iter_mut().zip(gi) {
                *g += r;
            }
        }
    }
    debug_assert_eq!(grad_theta.len(), d * c);
    LossGrad { loss, grad_theta, grad_bias }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Gd,
}

impl std::str::FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adam" => Ok(Optimizer::Adam),
            "gd" => Ok(Optimizer::Gd),
            other => Err(format!("unknown optimizer '{other}' (expected adam|gd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub use_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            epochs: 100,
            weight_decay: 0.0,
            optimizer: Optimizer::Adam,
            seed: 0,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            use_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(DgcError::InvalidConfig(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(DgcError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(DgcError::InvalidConfig(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

/// Training traces, final accuracy and timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub diffusion: Option<DiffusionConfig>,
    pub train_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
    pub preprocess_ms: f64,
    pub train_ms: f64,
}

impl TrainReport {
    /// The report with timings zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        Self { preprocess_ms: 0.0, train_ms: 0.0, ..self.clone() }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

fn adam_update(params: &mut [f64], grad: &[f64], st: &mut AdamState, cfg: &TrainConfig) {
    let (b1, b2) = cfg.adam_betas;
    let c1 = 1.0 - b1.powi(st.step);
    let c2 = 1.0 - b2.powi(st.step);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(st.m.iter_mut()).zip(st.v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
    }
}

/// Full-batch training on the nodes in `train_mask`, tracking accuracy on
/// `val_mask` each epoch. Starts from zero weights, so the result depends only
/// on the inputs and the config.
pub fn fit(
    x: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    train_mask: &[bool],
    val_mask: &[bool],
    cfg: &TrainConfig,
) -> Result<(SoftmaxModel, Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if train_mask.len() != x.rows() || val_mask.len() != x.rows() || labels.len() != x.rows() {
        return Err(DgcError::DimensionMismatch("mask/labels length differs from node count".into()));
    }
    let train_idx = masked_indices(train_mask);
    if train_idx.is_empty() {
        return Err(DgcError::EmptyMask);
    }
    check_labels(labels, &train_idx, num_classes)?;
    let val_idx = masked_indices(val_mask);
    check_labels(labels, &val_idx, num_classes)?;

    let xs = x.select_rows(&train_idx);
    let ys: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let xv = x.select_rows(&val_idx);
    let yv: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut model = SoftmaxModel::zeros(x.cols(), num_classes, cfg.use_bias);
    let mut st_theta = AdamState::new(model.theta.len());
    let mut st_bias = AdamState::new(model.bias.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut val_acc = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let lg = batch_loss_grad(&model, &xs, &ys, cfg.weight_decay);
        losses.push(lg.loss);
        match cfg.optimizer {
            Optimizer::Adam => {
                st_theta.step += 1;
                st_bias.step += 1;
                adam_update(&mut model.theta, &lg.grad_theta, &mut st_theta, cfg);
                if model.use_bias {
                    adam_update(&mut model.bias, &lg.grad_bias, &mut st_bias, cfg);
                }
            }
            Optimizer::Gd => {
                for (p, g) in model.theta.iter_mut().zip(&lg.grad_theta) {
                    *p -= cfg.learning_rate * g;
                }
                if model.use_bias {
                    for (p, g) in model.bias.iter_mut().zip(&lg.grad_bias) {
                        *p -= cfg.learning_rate * g;
                    }
                }
            }
        }
        if !model.is_finite() {
            return Err(DgcError::InvalidConfig("training diverged to non-finite weights".into()));
        }
        val_acc.push(if yv.is_empty() { 0.0 } else { accuracy_rows(&model, &xv, &yv) });
    }
    Ok((model, losses, val_acc))
}

/// Trains on `dataset`'s train mask using the already-propagated features `x`,
/// and reports validation/test accuracy.
pub fn train(x: &FeatureMatrix, dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<(SoftmaxModel, TrainReport)> {
    let masks = &dataset.masks;
    let start = Instant::now();
    let (model, train_loss, val_acc) =
        fit(x, &dataset.labels, dataset.num_classes, &masks.train, &masks.val, cfg)?;
    let train_ms = start.elapsed().as_secs_f64() * 1e3;
    let final_test_acc = if masks.test.iter().any(|&m| m) {
        evaluate(&model, x, &dataset.labels, &masks.test)?
    } else {
        0.0
    };
    let final_val_acc = val_acc.last().copied().unwrap_or(0.0);
    let report = TrainReport {
        config: *cfg,
        diffusion: None,
        train_loss,
        val_acc,
        final_val_acc,
        final_test_acc,
        preprocess_ms: 0.0,
        train_ms,
    };
    Ok((model, report))
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn accuracy_rows(m: &SoftmaxModel, xs: &FeatureMatrix, ys: &[usize]) -> f64 {
    let mut p = m.logits(xs).expect("shape checked by caller");
    softmax_rows(&mut p);
    let hits = ys.iter().enumerate().filter(|&(i, &y)| argmax(p.row(i)) == y).count();
    hits as f64 / ys.len() as f64
}

/// Fraction of masked nodes whose most probable class equals the label.
pub fn evaluate(m: &SoftmaxModel, x: &FeatureMatrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    m.check_input(x)?;
    if mask.len() != x.rows() || labels.len() != x.rows() {
        return Err(DgcError::DimensionMismatch("mask/labels length differs from node count".into()));
    }
    let idx = masked_indices(mask);
    if idx.is_empty() {
        return Err(DgcError::EmptyMask);
    }
    let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    Ok(accuracy_rows(m, &x.select_rows(&idx), &ys))
}

/// Validation accuracy per weight-decay candidate, and the chosen value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDecaySearch {
    pub best: f64,
    pub candidates: Vec<(f64, f64)>,
}

/// Picks the weight decay with the highest final validation accuracy; ties
/// go to the smaller value.
pub fn tune_weight_decay(
    x: &FeatureMatrix,
    dataset: &LabeledDataset,
    base: &TrainConfig,
    grid: &[f64],
) -> Result<WeightDecaySearch> {
    if grid.is_empty() {
        return Err(DgcError::InvalidConfig("empty weight-decay grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut candidates = Vec::with_capacity(sorted.len());
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for wd in sorted {
        let cfg = TrainConfig { weight_decay: wd, ..*base };
        let masks = &dataset.masks;
        let (_, _, trace) = fit(x, &dataset.labels, dataset.num_classes, &masks.train, &masks.val, &cfg)?;
        let val_acc = trace.last().copied().unwrap_or(0.0);
        candidates.push((wd, val_acc));
        if val_acc > best.1 {
            best = (wd, val_acc);
        }
    }
    Ok(WeightDecaySearch { best: best.0, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_model_is_uniform() {
        let m = SoftmaxModel::zeros(2, 3, true);
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let p = forward(&m, &x).unwrap();
        for i in 0..2 {
            for k in 0..3 {
                assert_abs_diff_eq!(p.get(i, k), 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let m = SoftmaxModel::from_parts(1, 2, vec![1000.0, 0.0], vec![0.0, 0.0]).unwrap();
        let p = forward(&m, &FeatureMatrix::column(&[1.0])).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert!(p.get(0, 1) < 1e-300);
        assert!(p.is_finite());
    }

    #[test]
    fn forward_dimension_mismatch() {
        let m = SoftmaxModel::zeros(3, 2, true);
        assert!(matches!(forward(&m, &FeatureMatrix::zeros(1, 2)), Err(DgcError::DimensionMismatch(_))));
    }

    #[test]
    fn zero_model_loss_is_log_c() {
        let m = SoftmaxModel::zeros(2, 4, true);
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 1.0]]);
        let lg = loss_and_grad(&m, &x, &[0, 3, 1], &[true, true, false], 0.3).unwrap();
        assert_abs_diff_eq!(lg.loss, 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn loss_errors() {
        let m = SoftmaxModel::zeros(1, 2, true);
        let x = FeatureMatrix::column(&[1.0, 2.0]);
        assert!(matches!(loss_and_grad(&m, &x, &[0, 1], &[false, false], 0.0), Err(DgcError::EmptyMask)));
        assert!(matches!(
            loss_and_grad(&m, &x, &[0, 2], &[true, true], 0.0),
            Err(DgcError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn gd_decreases_loss_on_separable_pair() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let labels = [0, 1];
        let mask = [true, true];
        let cfg = TrainConfig { optimizer: Optimizer::Gd, learning_rate: 0.05, epochs: 50, ..Default::default() };
        let (_, losses, _) = fit(&x, &labels, 2, &mask, &mask, &cfg).unwrap();
        assert!(losses.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_epochs_rejected() {
        let x = FeatureMatrix::column(&[1.0]);
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(fit(&x, &[0], 1, &[true], &[true], &cfg), Err(DgcError::InvalidConfig(_))));
    }

    #[test]
    fn evaluate_tie_breaks_to_class_zero() {
        let m = SoftmaxModel::zeros(1, 2, true);
        let x = FeatureMatrix::column(&[1.0, 2.0, 3.0, 4.0]);
        let acc = evaluate(&m, &x, &[0, 1, 0, 1], &[true; 4]).unwrap();
        assert_eq!(acc, 0.5);
        assert!(matches!(evaluate(&m, &x, &[0, 1, 0, 1], &[false; 4]), Err(DgcError::EmptyMask)));
    }

    #[test]
    fn evaluate_perfect() {
        let m = SoftmaxModel::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(evaluate(&m, &x, &[0, 1], &[true, true]).unwrap(), 1.0);
    }

    #[test]
    fn no_bias_keeps_bias_zero() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let cfg = TrainConfig { use_bias: false, epochs: 10, ..Default::default() };
        let (m, _, _) = fit(&x, &[0, 1, 1], 2, &[true; 3], &[true; 3], &cfg).unwrap();
        assert!(m.bias().iter().all(|&b| b == 0.0));
        assert!(!m.uses_bias());
    }
}
