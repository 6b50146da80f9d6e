//! Seeded numerical verification: error bounds, convergence orders,
//! equilibrium, semigroup and gradient checks.
use dgc::experiments::{verify, verify_csv};

fn main() -> dgc::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse().expect("seed must be an integer")).unwrap_or(0);
    let report = verify(seed)?;
    print!("{}", verify_csv(&report));
    println!("{}", if report.pass { "all checks passed" } else { "verification FAILED" });
    Ok(())
}
