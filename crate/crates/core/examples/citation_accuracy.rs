//! SGC and DGC test accuracy on a citation bundle.
//!
//! cargo run --release --example citation_accuracy -- data/cora
use dgc::classifier::TrainConfig;
use dgc::data::load_bundle;
use dgc::diffusion::DiffusionConfig;
use dgc::experiments::{format_diffusion, run, WeightDecay};

fn main() -> dgc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/cora".into());
    let ds = load_bundle(&path)?;
    let (train, val, test) = ds.masks.counts();
    println!("{path}: {} nodes, {} features, split {train}/{val}/{test}", ds.num_nodes(), ds.features.cols());

    for cfg in [DiffusionConfig::sgc(2), DiffusionConfig::sgc(100), DiffusionConfig::euler(5.3, 100)] {
        let (_, r) = run(&ds, &cfg, &TrainConfig::default(), &WeightDecay::default())?;
        println!(
            "{:<22} wd {:<6e} val {:.1}% test {:.1}% ({:.0} ms propagate)",
            format_diffusion(&cfg),
            r.config.weight_decay,
            100.0 * r.final_val_acc,
            100.0 * r.final_test_acc,
            r.preprocess_ms
        );
    }
    Ok(())
}
