//! Accuracy as a function of terminal time at a fixed step count.
//!
//! cargo run --release --example terminal_time_sweep -- data/cora
use dgc::classifier::TrainConfig;
use dgc::data::load_bundle;
use dgc::diffusion::DiffusionConfig;
use dgc::experiments::{preprocess, resolve_weight_decay, sweep, sweep_csv, SweepParam, SweepSpec, WeightDecay};

fn main() -> dgc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/cora".into());
    let ds = load_bundle(&path)?;
    let base = DiffusionConfig::euler(5.3, 100);
    let train = TrainConfig::default();

    let (x, _) = preprocess(&ds, &base)?;
    let wd = resolve_weight_decay(&x, &ds, &train, &WeightDecay::default())?;
    let spec = SweepSpec::parse(SweepParam::T, "1:10:1")?;
    let rows = sweep(&ds, &base, &train, &WeightDecay::Fixed(wd), &spec, 0)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
