//! Propagate once, store the features, train from the stored copy and save
//! the model. Runs on a generated SBM so no bundle is needed.
use dgc::classifier::{evaluate, train, TrainConfig};
use dgc::data::{generate_sbm, write_bundle, SbmConfig};
use dgc::diffusion::DiffusionConfig;
use dgc::experiments::preprocess;
use dgc::formats::{read_cache, read_checkpoint, write_cache, write_checkpoint};

fn main() -> dgc::Result<()> {
    let dir = std::env::temp_dir().join("dgc-example");
    let (ds, _) = generate_sbm(&SbmConfig::default())?;
    write_bundle(&ds, dir.join("sbm"))?;

    let cfg = DiffusionConfig::euler(2.0, 20);
    let (x, ms) = preprocess(&ds, &cfg)?;
    write_cache(dir.join("x.dgcf"), &x, &cfg)?;
    println!("propagated in {ms:.1} ms, cached at {}", dir.join("x.dgcf").display());

    let (cached, stored_cfg) = read_cache(dir.join("x.dgcf"))?;
    assert_eq!((&cached, stored_cfg), (&x, cfg));
    let (model, report) = train(&cached, &ds, &TrainConfig { weight_decay: 1e-4, ..TrainConfig::default() })?;
    write_checkpoint(dir.join("m.dgcm"), &model)?;

    let restored = read_checkpoint(dir.join("m.dgcm"))?;
    let acc = evaluate(&restored, &cached, &ds.labels, &ds.masks.test)?;
    println!("test accuracy {:.1}% (report {:.1}%)", 100.0 * acc, 100.0 * report.final_test_acc);
    Ok(())
}
