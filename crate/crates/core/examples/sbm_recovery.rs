//! Plant a diffusion-corrupted signal on a stochastic block model and find
//! the terminal time that best undoes it.
use dgc::classifier::TrainConfig;
use dgc::data::SbmConfig;
use dgc::experiments::risk_curve;

fn main() -> dgc::Result<()> {
    let sbm = SbmConfig { t_star: 1.5, ..SbmConfig::default() };
    let grid: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
    let rows = risk_curve(&sbm, &grid, &TrainConfig::default(), 1e-4)?;
    for r in &rows {
        println!("t_hat {:.1}  risk {:.3e}  test {:.1}%", r.t_hat, r.risk, 100.0 * r.test_acc);
    }
    let best = rows.iter().min_by(|a, b| a.risk.total_cmp(&b.risk)).unwrap();
    println!("planted t* = {}, recovered t_hat = {:.1}", sbm.t_star, best.t_hat);
    Ok(())
}
