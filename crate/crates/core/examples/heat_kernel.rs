//! Build a small graph by hand, diffuse a signal exactly, and watch the
//! Euler and RK4 integrators converge to it.
use dgc::diffusion::{euler_propagate, rk4_propagate};
use dgc::graph::{build_graph, normalize, spectral_norm, Variant};
use dgc::oracle::{exact_heat_kernel, laplacian_eigen};
use dgc::FeatureMatrix;

fn main() -> dgc::Result<()> {
    // Two triangles joined by a bridge.
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)];
    let g = build_graph(&edges, 6)?;
    let s = normalize(&g, Variant::Aug)?;

    let eig = laplacian_eigen(&s)?;
    let power = spectral_norm(&s.laplacian(), 1e-12, 10_000);
    println!("spectrum {:.4?}", eig.eigenvalues());
    println!("lambda_max dense {:.6} power {:.6}", eig.max_eigenvalue(), power.value);

    let x = FeatureMatrix::column(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let t = 2.0;
    let exact = exact_heat_kernel(&eig, t, &x)?;
    println!("e^(-tL) x at t={t}: {:.4?}", exact.as_slice());

    println!("{:>5} {:>12} {:>12}", "K", "euler err", "rk4 err");
    for k in [1, 2, 4, 8, 16, 32, 64] {
        let e = euler_propagate(&x, &s, t, k)?.distance(&exact);
        let r = rk4_propagate(&x, &s, t, k)?.distance(&exact);
        println!("{k:>5} {e:>12.3e} {r:>12.3e}");
    }
    Ok(())
}
