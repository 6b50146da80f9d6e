use dgc::classifier::{evaluate, fit, forward, loss_and_grad, Optimizer, SoftmaxModel, TrainConfig};
use dgc::FeatureMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Instance {
    x: FeatureMatrix,
    labels: Vec<usize>,
    mask: Vec<bool>,
    model: SoftmaxModel,
    wd: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=10);
    let d = rng.gen_range(1..=5);
    let c = rng.gen_range(2..=4);
    let x = FeatureMatrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
    let labels = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    mask[0] = true;
    let theta = (0..d * c).map(|_| rng.sample(StandardNormal)).collect();
    let bias = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let model = SoftmaxModel::from_parts(d, c, theta, bias).unwrap();
    Instance { x, labels, mask, model, wd: rng.gen_range(0.0..0.05) }
}

/// Cross-entropy plus L2 on theta, written out directly from the definition.
fn reference_loss(inst: &Instance, model: &SoftmaxModel) -> f64 {
    let (d, c) = (model.feature_dim(), model.num_classes());
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..inst.x.rows() {
        if !inst.mask[i] {
            continue;
        }
        let z: Vec<f64> = (0..c)
            .map(|k| model.bias()[k] + (0..d).map(|j| inst.x.get(i, j) * model.theta()[j * c + k]).sum::<f64>())
            .collect();
        let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
        total += lse - z[inst.labels[i]];
        count += 1;
    }
    total / count as f64 + 0.5 * inst.wd * model.theta().iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let inst = instance(seed);
        let lg = loss_and_grad(&inst.model, &inst.x, &inst.labels, &inst.mask, inst.wd).unwrap();
        assert!((lg.loss - reference_loss(&inst, &inst.model)).abs() <= 1e-12 * lg.loss.abs().max(1.0));
        let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-3);
        for k in 0..inst.model.theta().len() {
            let (mut p, mut m) = (inst.model.clone(), inst.model.clone());
            p.theta_mut()[k] += h;
            m.theta_mut()[k] -= h;
            let fd = (reference_loss(&inst, &p) - reference_loss(&inst, &m)) / (2.0 * h);
            worst = worst.max(rel(lg.grad_theta[k], fd));
        }
        for k in 0..inst.model.bias().len() {
            let (mut p, mut m) = (inst.model.clone(), inst.model.clone());
            p.bias_mut()[k] += h;
            m.bias_mut()[k] -= h;
            let fd = (reference_loss(&inst, &p) - reference_loss(&inst, &m)) / (2.0 * h);
            worst = worst.max(rel(lg.grad_bias[k], fd));
        }
    }
    assert!(worst <= 1e-6, "max relative gradient error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_are_normalized(seed: u64) {
        let inst = instance(seed);
        let p = forward(&inst.model, &inst.x).unwrap();
        for i in 0..p.rows() {
            prop_assert!(p.row(i).iter().all(|&v| v >= 0.0));
            prop_assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gd_decreases_loss_with_small_steps(seed: u64) {
        let inst = instance(seed);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 40,
            weight_decay: inst.wd.max(1e-3),
            optimizer: Optimizer::Gd,
            ..TrainConfig::default()
        };
        let (_, losses, _) = fit(&inst.x, &inst.labels, inst.model.num_classes(), &inst.mask, &inst.mask, &cfg).unwrap();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15, "loss rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn argmax_ignores_logit_shift(seed: u64, shift in -50.0f64..50.0) {
        let inst = instance(seed);
        let mut shifted = inst.model.clone();
        shifted.bias_mut().iter_mut().for_each(|b| *b += shift);
        let all = vec![true; inst.x.rows()];
        let a = evaluate(&inst.model, &inst.x, &inst.labels, &all).unwrap();
        let b = evaluate(&shifted, &inst.x, &inst.labels, &all).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn training_is_bitwise_deterministic(seed: u64) {
        let inst = instance(seed);
        let cfg = TrainConfig { weight_decay: inst.wd, epochs: 20, ..TrainConfig::default() };
        let c = inst.model.num_classes();
        let (a, la, va) = fit(&inst.x, &inst.labels, c, &inst.mask, &inst.mask, &cfg).unwrap();
        let (b, lb, vb) = fit(&inst.x, &inst.labels, c, &inst.mask, &inst.mask, &cfg).unwrap();
        prop_assert_eq!(a.theta(), b.theta());
        prop_assert_eq!(a.bias(), b.bias());
        prop_assert_eq!(la, lb);
        prop_assert_eq!(va, vb);
    }
}
