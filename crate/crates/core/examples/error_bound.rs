//! Euler error against its closed-form global bound on a random graph.
use dgc::data::erdos_renyi;
use dgc::diffusion::euler_propagate;
use dgc::graph::{normalize, Variant};
use dgc::oracle::{euler_error_bound, exact_heat_kernel, laplacian_eigen};
use dgc::FeatureMatrix;

fn main() -> dgc::Result<()> {
    let g = erdos_renyi(30, 0.2, 11)?;
    let s = normalize(&g, Variant::Aug)?;
    let eig = laplacian_eigen(&s)?;
    let norm_l = eig.max_eigenvalue();
    let x = FeatureMatrix::from_vec(30, 1, (0..30).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect())?;
    let norm_x = x.frobenius_norm();

    println!("{:>4} {:>5} {:>12} {:>12}", "T", "K", "error", "bound");
    for t in [0.5, 1.0, 2.0] {
        let exact = exact_heat_kernel(&eig, t, &x)?;
        for k in [1, 4, 16, 64] {
            let err = euler_propagate(&x, &s, t, k)?.distance(&exact);
            let bound = euler_error_bound(t, k, norm_l, norm_x);
            assert!(err <= bound);
            println!("{t:>4} {k:>5} {err:>12.3e} {bound:>12.3e}");
        }
    }
    Ok(())
}
