use dgc::data::erdos_renyi;
use dgc::diffusion::euler_propagate;
use dgc::graph::{normalize, PropagationMatrix, Variant};
use dgc::oracle::{
    eigendecompose, euler_error_bound, euler_local_error_bound, exact_heat_kernel, inverse_diffusion, laplacian_eigen,
};
use dgc::FeatureMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
    FeatureMatrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn laplacian(s: &PropagationMatrix) -> DMatrix<f64> {
    let n = s.num_nodes();
    DMatrix::from_row_slice(n, n, &s.laplacian().to_dense())
}

/// nalgebra's solver with a machine-precision stopping rule. Eigenvectors can
/// still carry residuals near 1e-10, so it is used for eigenvalues only.
fn reference_eigen(l: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::try_new(l.clone(), f64::EPSILON, 0).expect("converges")
}

/// e^{-tL} X through nalgebra's Pade matrix exponential; no eigensolver involved.
fn reference_kernel(l: &DMatrix<f64>, t: f64, x: &FeatureMatrix) -> FeatureMatrix {
    let xm = DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice());
    let y = (l * -t).exp() * xm;
    FeatureMatrix::from_vec(x.rows(), x.cols(), y.transpose().as_slice().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decomposition_invariants(n in 1usize..48, p in 0.05f64..0.6, seed: u64) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let eig = laplacian_eigen(&s).unwrap();
        let dense = s.laplacian().to_dense();
        let rec = eig.reconstruct();
        let rec_err = dense.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(rec_err <= 1e-8 * n as f64);
        prop_assert!(eig.orthonormality_error() <= 1e-10 * n as f64);
        prop_assert!(eig.eigenvalues()[0] >= -1e-10);
        prop_assert!(eig.eigenvalues().windows(2).all(|w| w[0] <= w[1]));

        let mut reference: Vec<f64> = reference_eigen(&laplacian(&s)).eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in eig.eigenvalues().iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn heat_kernel_matches_reference(n in 1usize..40, p in 0.05f64..0.6, seed: u64, t in 0.0f64..8.0) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = features(n, 3, &mut rng);
        let ours = exact_heat_kernel(&laplacian_eigen(&s).unwrap(), t, &x).unwrap();
        let theirs = reference_kernel(&laplacian(&s), t, &x);
        prop_assert!(ours.max_abs_diff(&theirs) <= 1e-10);
    }

    #[test]
    fn semigroup(n in 1usize..40, p in 0.05f64..0.6, seed: u64, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let eig = laplacian_eigen(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = features(n, 2, &mut rng);
        let two = exact_heat_kernel(&eig, a, &exact_heat_kernel(&eig, b, &x).unwrap()).unwrap();
        let one = exact_heat_kernel(&eig, a + b, &x).unwrap();
        prop_assert!(two.max_abs_diff(&one) <= 1e-10);
    }

    #[test]
    fn inverse_diffusion_round_trip(n in 1usize..40, p in 0.05f64..0.6, seed: u64, t in 0.0f64..3.0) {
        let g = erdos_renyi(n, p, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let eig = laplacian_eigen(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = features(n, 2, &mut rng);
        let back = exact_heat_kernel(&eig, t, &inverse_diffusion(&eig, t, &x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-8);
    }
}

/// Distance of `x` to its projection on the zero-eigenvalue subspace.
fn distance_to_equilibrium(l: &DMatrix<f64>, x: &FeatureMatrix) -> f64 {
    let eig = reference_eigen(l);
    let xm = DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice());
    let mut proj = DMatrix::zeros(x.rows(), x.cols());
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() < 1e-9 {
            let u = eig.eigenvectors.column(k);
            proj += &u * (u.transpose() * &xm);
        }
    }
    (xm - proj).norm()
}

#[test]
fn smoothing_is_monotone_on_connected_graphs() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let n = 16;
        let g = erdos_renyi(n, 0.35, seed).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let l = laplacian(&s);
        let zero_modes = reference_eigen(&l).eigenvalues.iter().filter(|v| v.abs() < 1e-9).count();
        if zero_modes != 1 {
            continue;
        }
        checked += 1;
        let eig = laplacian_eigen(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = features(n, 3, &mut rng);
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let h = exact_heat_kernel(&eig, 0.25 * i as f64, &x).unwrap();
            let dist = distance_to_equilibrium(&l, &h);
            assert!(dist <= prev + 1e-12, "seed {seed}: distance rose at t={}", 0.25 * i as f64);
            prev = dist;
        }
    }
    assert!(checked >= 30);
}

/// The bound, re-evaluated here from its closed form.
fn bound(t: f64, k: usize, norm_l: f64, norm_x: f64) -> f64 {
    t * norm_l * norm_x / (2.0 * k as f64) * ((t * norm_l).exp() - 1.0)
}

#[test]
fn euler_global_and_local_error_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=32);
        let g = erdos_renyi(n, 0.3, rng.gen()).unwrap();
        let s = normalize(&g, Variant::Aug).unwrap();
        let l = laplacian(&s);
        let norm_l = reference_eigen(&l).eigenvalues.amax();
        let mut x = features(n, 2, &mut rng);
        let norm = x.frobenius_norm();
        x.as_mut_slice().iter_mut().for_each(|v| *v /= norm);
        let norm_x = x.frobenius_norm();

        for t in [0.5, 1.0, 2.0, 4.0] {
            let exact = reference_kernel(&l, t, &x);
            for k in [1, 2, 4, 8, 16, 32, 64] {
                let err = euler_propagate(&x, &s, t, k).unwrap().distance(&exact);
                let b = bound(t, k, norm_l, norm_x);
                assert!((euler_error_bound(t, k, norm_l, norm_x) - b).abs() <= 1e-12 * b.max(1.0));
                assert!(err <= b + 1e-14, "n={n} t={t} k={k}: error {err} > bound {b}");
                checks += 1;

                let h = t / k as f64;
                let local = 0.5 * h * h * norm_l * norm_l * norm_x;
                assert!((euler_local_error_bound(h, norm_l, norm_x) - local).abs() <= 1e-15 * local.max(1.0));
                for step in [0, k / 2, k - 1] {
                    let from = reference_kernel(&l, step as f64 * h, &x);
                    let to = reference_kernel(&l, (step + 1) as f64 * h, &x);
                    let one = euler_propagate(&from, &s, h, 1).unwrap();
                    assert!(one.distance(&to) <= local + 1e-14, "local error exceeds bound at n={n} t={t} k={k}");
                }
            }
        }
    }
    assert_eq!(checks, 100 * 4 * 7);
}

#[test]
fn rejects_asymmetric_input() {
    assert!(eigendecompose(&[1.0, 2.0, 0.0, 1.0], 2).is_err());
}
