//! Propagation and training time across step counts.
//!
//! cargo run --release --example timing -- data/pubmed
use dgc::classifier::TrainConfig;
use dgc::data::load_bundle;
use dgc::diffusion::DiffusionConfig;
use dgc::experiments::{bench, bench_csv};

fn main() -> dgc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/pubmed".into());
    let ds = load_bundle(&path)?;
    let cfgs = [DiffusionConfig::sgc(2), DiffusionConfig::euler(6.0, 2), DiffusionConfig::euler(6.0, 100)];
    let train = TrainConfig { weight_decay: 1e-4, ..TrainConfig::default() };
    print!("{}", bench_csv(&bench(&ds, &cfgs, &train, 3)?));
    Ok(())
}
