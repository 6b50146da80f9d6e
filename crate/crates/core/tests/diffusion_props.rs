use dgc::data::erdos_renyi;
use dgc::diffusion::{euler_propagate, propagate, rk4_propagate, sgc_propagate, DiffusionConfig};
use dgc::graph::{normalize, Variant};
use dgc::oracle::{exact_heat_kernel, laplacian_eigen};
use dgc::FeatureMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn features(n: usize, d: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn log2_ratios(errors: &[f64], floor: f64) -> Vec<f64> {
    errors.windows(2).filter(|w| w[1] > floor).map(|w| (w[0] / w[1]).log2()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Steps inside each scheme's real-axis stability interval (aug spectrum
    /// lies in [0, 2)): Euler h <= 1, RK4 h <= 1.39.
    #[test]
    fn equilibrium_preserved(n in 2usize..40, p in 0.05f64..0.5, seed: u64, u in 0.0f64..=1.0, k in 1usize..60) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let v = FeatureMatrix::column(&s.equilibrium_vector());
        for cfg in [DiffusionConfig::euler(u * k as f64, k), DiffusionConfig::rk4(1.39 * u * k as f64, k)] {
            let out = propagate(&v, &s, &cfg).unwrap();
            prop_assert!(out.distance(&v) <= 1e-12 * v.frobenius_norm());
        }
    }

    /// Unstable steps: the equilibrium is still fixed in exact arithmetic, and
    /// the drift is bounded by roundoff times the step polynomial's growth.
    #[test]
    fn equilibrium_drift_is_amplified_roundoff(n in 2usize..40, p in 0.05f64..0.5, seed: u64, t in 0.0f64..20.0, k in 1usize..60) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let v = FeatureMatrix::column(&s.equilibrium_vector());
        let eig = laplacian_eigen(&s).unwrap();
        let h = t / k as f64;
        let euler = |z: f64| 1.0 + z;
        let rk4 = |z: f64| 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        for (cfg, poly) in [(DiffusionConfig::euler(t, k), &euler as &dyn Fn(f64) -> f64), (DiffusionConfig::rk4(t, k), &rk4)] {
            let growth = eig.eigenvalues().iter().map(|&l| poly(-h * l).abs()).fold(1.0, f64::max).powi(k as i32);
            let out = propagate(&v, &s, &cfg).unwrap();
            prop_assert!(out.distance(&v) <= 1e-12 * growth * v.frobenius_norm());
        }
    }

    #[test]
    fn euler_does_not_expand(n in 2usize..40, p in 0.05f64..0.5, seed: u64, k in 1usize..50, dt in 0.0f64..=1.0) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let x = features(n, 3, seed);
        let out = euler_propagate(&x, &s, dt * k as f64, k).unwrap();
        prop_assert!(out.frobenius_norm() <= x.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn unit_step_euler_is_sgc(n in 2usize..40, p in 0.05f64..0.5, seed: u64, k in 0usize..30) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let x = features(n, 4, seed ^ 1);
        let a = euler_propagate(&x, &s, k as f64, k.max(1)).unwrap();
        let b = sgc_propagate(&x, &s, k).unwrap();
        if k == 0 {
            prop_assert_eq!(a, x);
        } else {
            prop_assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn propagation_is_deterministic(n in 2usize..40, seed: u64) {
        let g = erdos_renyi(n, 0.2, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let x = features(n, 5, seed);
        let cfg = DiffusionConfig::rk4(2.5, 7);
        prop_assert_eq!(propagate(&x, &s, &cfg).unwrap(), propagate(&x, &s, &cfg).unwrap());
    }
}

#[test]
fn convergence_orders_against_exact_kernel() {
    for seed in 0..5u64 {
        let n = 20;
        let g = erdos_renyi(n, 0.3, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let eig = laplacian_eigen(&s).unwrap();
        let x = features(n, 2, seed);
        let t = 2.0;
        let exact = exact_heat_kernel(&eig, t, &x).unwrap();
        let ks: Vec<usize> = (1..=9).map(|p| 1 << p).collect();
        let euler: Vec<f64> = ks.iter().map(|&k| euler_propagate(&x, &s, t, k).unwrap().distance(&exact)).collect();
        let rk4: Vec<f64> = ks.iter().map(|&k| rk4_propagate(&x, &s, t, k).unwrap().distance(&exact)).collect();

        assert!(euler.windows(2).all(|w| w[1] < w[0]), "euler errors not decreasing: {euler:?}");
        let r = log2_ratios(&euler, 1e-12);
        assert!((r.last().unwrap() - 1.0).abs() <= 0.2, "euler ratios {r:?}");

        let r = log2_ratios(&rk4, 1e-12);
        let tail: Vec<f64> = r.iter().copied().skip(1).collect();
        assert!(!tail.is_empty());
        assert!(tail.iter().all(|v| (v - 4.0).abs() <= 0.5), "rk4 ratios {r:?}");
    }
}

#[test]
fn sym_variant_rejects_large_steps() {
    let g = erdos_renyi(10, 0.5, 3).unwrap();
    let s = normalize(&g, Variant::Sym).unwrap();
    let x = features(10, 1, 0);
    let cfg = DiffusionConfig::euler(3.0, 2).with_variant(Variant::Sym);
    assert!(propagate(&x, &s, &cfg).is_err());
    let cfg = DiffusionConfig::euler(3.0, 3).with_variant(Variant::Sym);
    assert!(propagate(&x, &s, &cfg).is_ok());
}

#[test]
fn unstable_rk4_step_drifts_from_equilibrium_only_by_roundoff() {
    let g = erdos_renyi(14, 0.16279755537426555, 3823636103403173701).unwrap();
    let s = normalize(&g, Variant::Aug).unwrap();
    let v = FeatureMatrix::column(&s.equilibrium_vector());
    let stable = propagate(&v, &s, &DiffusionConfig::rk4(15.2, 11)).unwrap();
    assert!(stable.distance(&v) <= 1e-12 * v.frobenius_norm());
    let unstable = propagate(&v, &s, &DiffusionConfig::rk4(15.2, 2)).unwrap();
    assert!(unstable.distance(&v) <= 1e-10 * v.frobenius_norm());
}
