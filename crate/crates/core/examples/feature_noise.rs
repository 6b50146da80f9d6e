//! DGC and SGC under Gaussian feature noise.
//!
//! cargo run --release --example feature_noise -- data/cora
use dgc::classifier::TrainConfig;
use dgc::data::load_bundle;
use dgc::diffusion::DiffusionConfig;
use dgc::experiments::{noise_csv, noise_robustness};

fn main() -> dgc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/cora".into());
    let ds = load_bundle(&path)?;
    let dgc = DiffusionConfig::euler(5.3, 100);
    let sgc = DiffusionConfig::sgc(2);
    let rows = noise_robustness(&ds, (&dgc, 1e-5), (&sgc, 1e-5), &TrainConfig::default(), &[0.0, 0.05, 0.1], &[0, 1, 2])?;
    print!("{}", noise_csv(&rows));
    Ok(())
}
