//! Experiment drivers behind the command-line tool: propagation plus
//! training, parameter sweeps, noise robustness, the numerical verification
//! suite, synthetic risk curves and timing benchmarks. Every driver returns
//! plain rows; the `*_csv` helpers render them with a fixed header.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, SoftmaxModel, TrainConfig, TrainReport, WEIGHT_DECAY_GRID};
use crate::data::{self, LabeledDataset, SbmConfig};
use crate::diffusion::{self, DiffusionConfig, Scheme};
use crate::error::{DgcError, Result};
use crate::graph::{self, Variant};
use crate::matrix::FeatureMatrix;
use crate::oracle;

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Weight decay given directly or chosen on validation accuracy over a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightDecay {
    Fixed(f64),
    Grid(Vec<f64>),
}

impl Default for WeightDecay {
    fn default() -> Self {
        WeightDecay::Grid(WEIGHT_DECAY_GRID.to_vec())
    }
}

/// Normalizes the graph and propagates `x`; returns the features and the
/// elapsed milliseconds.
pub fn preprocess_features(
    ds: &LabeledDataset,
    x: &FeatureMatrix,
    cfg: &DiffusionConfig,
) -> Result<(FeatureMatrix, f64)> {
    let start = Instant::now();
    let s = graph::normalize(&ds.graph, cfg.variant)?;
    let out = diffusion::propagate(x, &s, cfg)?;
    Ok((out, ms_since(start)))
}

pub fn preprocess(ds: &LabeledDataset, cfg: &DiffusionConfig) -> Result<(FeatureMatrix, f64)> {
    preprocess_features(ds, &ds.features, cfg)
}

pub fn resolve_weight_decay(
    x: &FeatureMatrix,
    ds: &LabeledDataset,
    base: &TrainConfig,
    wd: &WeightDecay,
) -> Result<f64> {
    match wd {
        WeightDecay::Fixed(v) => Ok(*v),
        WeightDecay::Grid(grid) => Ok(classifier::tune_weight_decay(x, ds, base, grid)?.best),
    }
}

/// Trains on already-propagated features and stamps the report with the
/// diffusion config and preprocessing time.
pub fn train_propagated(
    x: &FeatureMatrix,
    ds: &LabeledDataset,
    diffusion: &DiffusionConfig,
    preprocess_ms: f64,
    base: &TrainConfig,
    wd: &WeightDecay,
) -> Result<(SoftmaxModel, TrainReport)> {
    let weight_decay = resolve_weight_decay(x, ds, base, wd)?;
    let cfg = TrainConfig { weight_decay, ..*base };
    let (model, mut report) = classifier::train(x, ds, &cfg)?;
    report.diffusion = Some(*diffusion);
    report.preprocess_ms = preprocess_ms;
    Ok((model, report))
}

/// Propagation followed by training: the full pipeline for one config.
pub fn run(
    ds: &LabeledDataset,
    diffusion: &DiffusionConfig,
    base: &TrainConfig,
    wd: &WeightDecay,
) -> Result<(SoftmaxModel, TrainReport)> {
    let (x, pre_ms) = preprocess(ds, diffusion)?;
    train_propagated(&x, ds, diffusion, pre_ms, base, wd)
}

/// Parses `scheme:T:K[:variant]`, or `sgc:K[:variant]`.
pub fn parse_diffusion(spec: &str) -> Result<DiffusionConfig> {
    let bad = || DgcError::InvalidConfig(format!("bad diffusion spec '{spec}' (expected scheme:T:K[:variant] or sgc:K)"));
    let parts: Vec<&str> = spec.split(':').collect();
    let scheme: Scheme = parts.first().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let (cfg, rest) = match scheme {
        Scheme::Sgc => {
            let k: usize = parts.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            (DiffusionConfig::sgc(k), &parts[2..])
        }
        _ => {
            let t: f64 = parts.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let k: usize = parts.get(2).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let base = DiffusionConfig { scheme, variant: Variant::Aug, terminal_time: t, steps: k };
            (base, &parts[3..])
        }
    };
    let cfg = match rest {
        [] => cfg,
        [v] => cfg.with_variant(v.parse().map_err(|_| bad())?),
        _ => return Err(bad()),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_diffusion(cfg: &DiffusionConfig) -> String {
    match cfg.scheme {
        Scheme::Sgc => format!("sgc:{}:{}", cfg.steps, cfg.variant.as_str()),
        s => format!("{}:{}:{}:{}", s.as_str(), cfg.terminal_time, cfg.steps, cfg.variant.as_str()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "sigma")]
    Sigma,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::T => "T",
            SweepParam::K => "K",
            SweepParam::Sigma => "sigma",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "T" | "t" => Ok(SweepParam::T),
            "K" | "k" => Ok(SweepParam::K),
            "sigma" => Ok(SweepParam::Sigma),
            other => Err(format!("unknown sweep parameter '{other}' (expected T|K|sigma)")),
        }
    }
}

/// Rounds away binary noise from range arithmetic so CSV values print short.
fn tidy(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// `count` log-spaced integers from `start` to `stop` inclusive, deduplicated.
pub fn log_spaced_steps(start: usize, stop: usize, count: usize) -> Vec<usize> {
    if count <= 1 || start >= stop {
        return vec![start];
    }
    let (a, b) = ((start as f64).ln(), (stop as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// A swept parameter and its strictly increasing values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DgcError::InvalidConfig("sweep has no values".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DgcError::InvalidConfig("sweep values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DgcError::InvalidConfig("sweep values must be strictly increasing".into()));
        }
        if param == SweepParam::K && values.iter().any(|v| v.fract() != 0.0) {
            return Err(DgcError::InvalidConfig("K values must be integers".into()));
        }
        Ok(Self { param, values })
    }

    /// Accepts `a,b,c`, `start:stop:step` (stop inclusive) or
    /// `log:start:stop:count` (integers, for K).
    pub fn parse(param: SweepParam, text: &str) -> Result<Self> {
        let bad = |m: &str| DgcError::InvalidConfig(format!("bad sweep values '{text}': {m}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let values = if let Some(rest) = text.strip_prefix("log:") {
            let p: Vec<&str> = rest.split(':').collect();
            if p.len() != 3 {
                return Err(bad("expected log:start:stop:count"));
            }
            let ints: Vec<usize> =
                p.iter().map(|s| s.parse::<usize>().map_err(|_| bad("not an integer"))).collect::<Result<_>>()?;
            if ints[0] == 0 {
                return Err(bad("log range must start above 0"));
            }
            log_spaced_steps(ints[0], ints[1], ints[2]).into_iter().map(|k| k as f64).collect()
        } else if text.contains(':') {
            let p: Vec<&str> = text.split(':').collect();
            if p.len() != 3 {
                return Err(bad("expected start:stop:step"));
            }
            let (start, stop, step) = (num(p[0])?, num(p[1])?, num(p[2])?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| tidy(start + i as f64 * step)).collect()
        } else {
            text.split(',').map(num).collect::<Result<_>>()?
        };
        Self::new(param, values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub preprocess_ms: f64,
    pub train_ms: f64,
}

pub const SWEEP_HEADER: &str = "param,value,val_acc,test_acc,preprocess_ms,train_ms";

/// The config `base` with the swept parameter set to `value`. Sweeping K on
/// SGC moves T with it.
pub fn sweep_point(base: &DiffusionConfig, param: SweepParam, value: f64) -> Result<DiffusionConfig> {
    let cfg = match param {
        SweepParam::K if base.scheme == Scheme::Sgc => DiffusionConfig::sgc(value as usize).with_variant(base.variant),
        SweepParam::K => DiffusionConfig { steps: value as usize, ..*base },
        SweepParam::T if base.scheme == Scheme::Sgc => {
            return Err(DgcError::InvalidConfig("sgc couples T to K; sweep K instead".into()))
        }
        SweepParam::T => DiffusionConfig { terminal_time: value, ..*base },
        SweepParam::Sigma => *base,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Retrains at every sweep value. A fixed weight decay is reused at every
/// point; a grid is searched again at each point. Noise for a sigma sweep is
/// drawn from `noise_seed`.
pub fn sweep(
    ds: &LabeledDataset,
    base: &DiffusionConfig,
    train: &TrainConfig,
    wd: &WeightDecay,
    spec: &SweepSpec,
    noise_seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let cfg = sweep_point(base, spec.param, value)?;
        let noisy;
        let x = if spec.param == SweepParam::Sigma {
            noisy = data::add_feature_noise(&ds.features, value, noise_seed);
            &noisy
        } else {
            &ds.features
        };
        let (xp, pre_ms) = preprocess_features(ds, x, &cfg)?;
        let weight_decay = resolve_weight_decay(&xp, ds, train, wd)?;
        let (_, report) = classifier::train(&xp, ds, &TrainConfig { weight_decay, ..*train })?;
        rows.push(SweepRow {
            param: spec.param,
            value,
            val_acc: report.final_val_acc,
            test_acc: report.final_test_acc,
            preprocess_ms: pre_ms,
            train_ms: report.train_ms,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{:.3}",
            r.param.as_str(),
            r.value,
            r.val_acc,
            r.test_acc,
            r.preprocess_ms,
            r.train_ms
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub seeds: usize,
    pub dgc_test_acc: f64,
    pub dgc_std: f64,
    pub sgc_test_acc: f64,
    pub sgc_std: f64,
}

pub const NOISE_HEADER: &str = "sigma,seeds,dgc_test_acc,dgc_std,sgc_test_acc,sgc_std";

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Test accuracy of the two configs on noise-injected features, averaged
/// over `seeds`. Each model keeps its own fixed weight decay.
pub fn noise_robustness(
    ds: &LabeledDataset,
    dgc: (&DiffusionConfig, f64),
    sgc: (&DiffusionConfig, f64),
    train: &TrainConfig,
    sigmas: &[f64],
    seeds: &[u64],
) -> Result<Vec<NoiseRow>> {
    if seeds.is_empty() {
        return Err(DgcError::InvalidConfig("noise experiment needs at least one seed".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
        return Err(DgcError::InvalidConfig(format!("sigma must be >= 0, got {s}")));
    }
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut accs = [Vec::new(), Vec::new()];
        for &seed in seeds {
            let x = data::add_feature_noise(&ds.features, sigma, seed);
            for (slot, (cfg, wd)) in [dgc, sgc].into_iter().enumerate() {
                let (xp, _) = preprocess_features(ds, &x, cfg)?;
                let (_, report) = classifier::train(&xp, ds, &TrainConfig { weight_decay: wd, ..*train })?;
                accs[slot].push(report.final_test_acc);
            }
        }
        let (dgc_test_acc, dgc_std) = mean_std(&accs[0]);
        let (sgc_test_acc, sgc_std) = mean_std(&accs[1]);
        rows.push(NoiseRow { sigma, seeds: seeds.len(), dgc_test_acc, dgc_std, sgc_test_acc, sgc_std });
    }
    Ok(rows)
}

pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut s = format!("{NOISE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.sigma, r.seeds, r.dgc_test_acc, r.dgc_std, r.sgc_test_acc, r.sgc_std
        );
    }
    s
}

/// Measured quantities of the numerical verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub graphs: usize,
    pub bound_checks: usize,
    pub bound_violations: usize,
    pub truncation_violations: usize,
    pub euler_slope: f64,
    pub rk4_slope: f64,
    pub equilibrium_err: f64,
    pub semigroup_err: f64,
    pub grad_max_rel_err: f64,
    pub pass: bool,
}

pub const VERIFY_HEADER: &str = "seed,graphs,bound_checks,bound_violations,truncation_violations,euler_slope,rk4_slope,equilibrium_err,semigroup_err,grad_max_rel_err,pass";

pub const VERIFY_GRAPHS: usize = 100;
pub const VERIFY_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const VERIFY_STEPS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const GRADIENT_INSTANCES: usize = 50;
/// Errors below this are rounding noise and excluded from slope estimates.
pub const ERROR_FLOOR: f64 = 1e-12;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    FeatureMatrix::from_vec(n, d, data).expect("sized by construction")
}

fn unit_frobenius(mut x: FeatureMatrix) -> FeatureMatrix {
    let norm = x.frobenius_norm();
    if norm > 0.0 {
        x.as_mut_slice().iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// Median of log2(e_k / e_2k) over consecutive step doublings whose finer
/// error is above the floor.
pub fn convergence_slope(errors: &[f64]) -> f64 {
    let mut ratios: Vec<f64> = errors
        .windows(2)
        .filter(|w| w[1] > ERROR_FLOOR && w[0] > 0.0)
        .map(|w| (w[0] / w[1]).log2())
        .collect();
    if ratios.is_empty() {
        return f64::NAN;
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    }
}

/// Largest relative difference between the analytic gradient and central
/// finite differences (step 1e-5), over `instances` random problems.
/// Relative error is `|a - f| / max(|a|, |f|, 1e-3)`.
pub fn gradient_check(seed: u64, instances: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(1..=10);
        let d = rng.gen_range(1..=5);
        let c = rng.gen_range(2..=4);
        let x = random_matrix(&mut rng, n, d);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        mask[rng.gen_range(0..n)] = true;
        let wd = rng.gen_range(0.0..0.01);
        let theta: Vec<f64> = (0..d * c).map(|_| rng.sample(StandardNormal)).collect();
        let bias: Vec<f64> = (0..c).map(|_| rng.gen_range(0.1..1.0)).collect();
        let model = SoftmaxModel::from_parts(d, c, theta, bias)?;
        let lg = classifier::loss_and_grad(&model, &x, &labels, &mask, wd)?;

        let loss_at = |m: &SoftmaxModel| classifier::loss_and_grad(m, &x, &labels, &mask, wd).map(|g| g.loss);
        let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-3);
        for k in 0..d * c {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.theta_mut()[k] += h;
            minus.theta_mut()[k] -= h;
            let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
            worst = worst.max(rel(lg.grad_theta[k], fd));
        }
        for k in 0..c {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.bias_mut()[k] += h;
            minus.bias_mut()[k] -= h;
            let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
            worst = worst.max(rel(lg.grad_bias[k], fd));
        }
    }
    Ok(worst)
}

/// Runs the verification suite: the Euler global and local error bounds on
/// seeded Erdős–Rényi graphs, convergence orders against the exact kernel,
/// equilibrium preservation, the semigroup property and gradient checks.
pub fn verify(seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound_checks = 0;
    let mut bound_violations = 0;
    let mut truncation_violations = 0;
    let mut semigroup_err = 0.0f64;
    let mut equilibrium_err = 0.0f64;

    for _ in 0..VERIFY_GRAPHS {
        let n = rng.gen_range(4..=32);
        let g = data::erdos_renyi(n, 0.3, rng.gen())?;
        let s = graph::normalize(&g, Variant::Aug)?;
        let eig = oracle::laplacian_eigen(&s)?;
        let norm_l = eig.max_eigenvalue().abs().max(eig.eigenvalues()[0].abs());
        let x0 = unit_frobenius(random_matrix(&mut rng, n, 3));
        let norm_x0 = x0.frobenius_norm();

        for &t in &VERIFY_TIMES {
            let exact = oracle::exact_heat_kernel(&eig, t, &x0)?;
            for &k in &VERIFY_STEPS {
                let approx = diffusion::euler_propagate(&x0, &s, t, k)?;
                bound_checks += 1;
                if approx.distance(&exact) > oracle::euler_error_bound(t, k, norm_l, norm_x0) {
                    bound_violations += 1;
                }
                let h = t / k as f64;
                let local_bound = oracle::euler_local_error_bound(h, norm_l, norm_x0);
                for step in 0..k {
                    let from = oracle::exact_heat_kernel(&eig, step as f64 * h, &x0)?;
                    let to = oracle::exact_heat_kernel(&eig, (step + 1) as f64 * h, &x0)?;
                    let one = diffusion::euler_propagate(&from, &s, h, 1)?;
                    if one.distance(&to) > local_bound {
                        truncation_violations += 1;
                    }
                }
            }
        }

        let a = oracle::exact_heat_kernel(&eig, 0.7, &oracle::exact_heat_kernel(&eig, 1.3, &x0)?)?;
        let b = oracle::exact_heat_kernel(&eig, 2.0, &x0)?;
        semigroup_err = semigroup_err.max(a.max_abs_diff(&b));

        let v = FeatureMatrix::column(&s.equilibrium_vector());
        for cfg in [DiffusionConfig::euler(5.3, 100), DiffusionConfig::rk4(5.3, 20), DiffusionConfig::sgc(10)] {
            let out = diffusion::propagate(&v, &s, &cfg)?;
            equilibrium_err = equilibrium_err.max(out.distance(&v) / v.frobenius_norm());
        }
    }

    let n = 24;
    let g = data::erdos_renyi(n, 0.3, seed ^ 0x5eed)?;
    let s = graph::normalize(&g, Variant::Aug)?;
    let eig = oracle::laplacian_eigen(&s)?;
    let x0 = unit_frobenius(random_matrix(&mut rng, n, 3));
    let t = 1.0;
    let exact = oracle::exact_heat_kernel(&eig, t, &x0)?;
    let ks: Vec<usize> = (1..=9).map(|p| 1usize << p).collect();
    let mut euler_err = Vec::new();
    let mut rk4_err = Vec::new();
    for &k in &ks {
        euler_err.push(diffusion::euler_propagate(&x0, &s, t, k)?.distance(&exact));
        rk4_err.push(diffusion::rk4_propagate(&x0, &s, t, k)?.distance(&exact));
    }
    let euler_slope = convergence_slope(&euler_err);
    let rk4_slope = convergence_slope(&rk4_err);

    let grad_max_rel_err = gradient_check(seed.wrapping_add(1), GRADIENT_INSTANCES)?;

    let pass = bound_violations == 0
        && truncation_violations == 0
        && (0.8..=1.2).contains(&euler_slope)
        && (3.5..=4.5).contains(&rk4_slope)
        && equilibrium_err <= 1e-12
        && semigroup_err <= 1e-10
        && grad_max_rel_err <= 1e-6;
    Ok(VerifyReport {
        seed,
        graphs: VERIFY_GRAPHS,
        bound_checks,
        bound_violations,
        truncation_violations,
        euler_slope,
        rk4_slope,
        equilibrium_err,
        semigroup_err,
        grad_max_rel_err,
        pass,
    })
}

pub fn verify_csv(r: &VerifyReport) -> String {
    format!(
        "{VERIFY_HEADER}\n{},{},{},{},{},{},{},{:e},{:e},{:e},{}\n",
        r.seed,
        r.graphs,
        r.bound_checks,
        r.bound_violations,
        r.truncation_violations,
        r.euler_slope,
        r.rk4_slope,
        r.equilibrium_err,
        r.semigroup_err,
        r.grad_max_rel_err,
        r.pass
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub t_hat: f64,
    pub risk: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

pub const RISK_HEADER: &str = "t_hat,risk,val_acc,test_acc";

/// Euler step size used to integrate each candidate terminal time.
pub const RISK_STEP: f64 = 0.01;

/// Generates the corrupted SBM dataset and, for every candidate terminal
/// time, propagates the observed features with DGC-Euler. The risk is the
/// mean squared error of a fixed random linear readout,
/// `(1/n) ||(X_clean - X_hat) W||_F^2`, with `W` (d x blocks) seeded from the
/// SBM seed. Accuracies come from training the classifier on `X_hat`.
pub fn risk_curve(sbm: &SbmConfig, grid: &[f64], train: &TrainConfig, weight_decay: f64) -> Result<Vec<RiskRow>> {
    if let Some(t) = grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(DgcError::InvalidConfig(format!("terminal time must be >= 0, got {t}")));
    }
    let (ds, clean) = data::generate_sbm(sbm)?;
    let n = ds.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(sbm.seed.wrapping_add(1));
    let scale = 1.0 / (sbm.feature_dim as f64).sqrt();
    let w: Vec<f64> = (0..sbm.feature_dim * sbm.blocks)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let target = clean.matmul(&w, sbm.blocks);
    let s = graph::normalize(&ds.graph, Variant::Aug)?;
    let cfg = TrainConfig { weight_decay, ..*train };

    let mut rows = Vec::with_capacity(grid.len());
    for &t_hat in grid {
        let k = ((t_hat / RISK_STEP).ceil() as usize).max(1);
        let x_hat = diffusion::euler_propagate(&ds.features, &s, t_hat, k)?;
        let pred = x_hat.matmul(&w, sbm.blocks);
        let risk = pred.distance(&target).powi(2) / n as f64;
        let (_, report) = classifier::train(&x_hat, &ds, &cfg)?;
        rows.push(RiskRow { t_hat, risk, val_acc: report.final_val_acc, test_acc: report.final_test_acc });
    }
    Ok(rows)
}

pub fn risk_csv(rows: &[RiskRow]) -> String {
    let mut s = format!("{RISK_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.t_hat, r.risk, r.val_acc, r.test_acc);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub config: String,
    pub scheme: Scheme,
    pub laplacian: Variant,
    pub terminal_time: f64,
    pub steps: usize,
    pub preprocess_ms: f64,
    pub train_ms: f64,
    pub total_ms: f64,
}

pub const BENCH_HEADER: &str = "config,scheme,laplacian,T,K,preprocess_ms,train_ms,total_ms";

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Wall-clock preprocessing and training time per config, median over
/// `runs` repetitions. Training uses the fixed weight decay in `train`.
pub fn bench(ds: &LabeledDataset, cfgs: &[DiffusionConfig], train: &TrainConfig, runs: usize) -> Result<Vec<BenchRow>> {
    if runs == 0 {
        return Err(DgcError::InvalidConfig("bench needs at least one run".into()));
    }
    let mut rows = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let (mut pre, mut tr, mut tot) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..runs {
            let (x, pre_ms) = preprocess(ds, cfg)?;
            let start = Instant::now();
            classifier::train(&x, ds, train)?;
            let train_ms = ms_since(start);
            pre.push(pre_ms);
            tr.push(train_ms);
            tot.push(pre_ms + train_ms);
        }
        rows.push(BenchRow {
            config: format_diffusion(cfg),
            scheme: cfg.scheme,
            laplacian: cfg.variant,
            terminal_time: cfg.terminal_time,
            steps: cfg.steps,
            preprocess_ms: median(&mut pre),
            train_ms: median(&mut tr),
            total_ms: median(&mut tot),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3},{:.3},{:.3}",
            r.config,
            r.scheme.as_str(),
            r.laplacian.as_str(),
            r.terminal_time,
            r.steps,
            r.preprocess_ms,
            r.train_ms,
            r.total_ms
        );
    }
    s
}

/// Propagated features as CSV, one row per node: `node,label,f0,f1,...`.
pub fn features_csv(x: &FeatureMatrix, labels: &[usize]) -> String {
    let mut s = String::from("node,label");
    for j in 0..x.cols() {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for i in 0..x.rows() {
        let _ = write!(s, "{i},{}", labels[i]);
        for v in x.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}
