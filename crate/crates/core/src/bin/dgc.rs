use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dgc::classifier::{Optimizer, TrainConfig};
use dgc::data::{self, SbmConfig};
use dgc::diffusion::{DiffusionConfig, Scheme};
use dgc::experiments::{self as ex, SweepParam, SweepSpec, WeightDecay};
use dgc::formats;
use dgc::graph::Variant;
use dgc::{DgcError, Result};

/// Decoupled graph convolution: feature propagation by the graph heat
/// equation with independent terminal time T and step count K.
#[derive(Parser)]
#[command(name = "dgc", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Graph bundle directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Integrator: sgc, euler or rk4.
    #[arg(long, global = true, default_value = "euler")]
    scheme: Scheme,
    /// Normalization: aug (self-loops) or sym.
    #[arg(long, global = true, default_value = "aug")]
    laplacian: Variant,
    /// Terminal time (ignored by sgc, which uses T = K).
    #[arg(long = "T", global = true)]
    terminal_time: Option<f64>,
    /// Propagation steps.
    #[arg(long = "K", global = true, default_value_t = 100)]
    steps: usize,
    #[arg(long, global = true, default_value_t = 0.2)]
    lr: f64,
    #[arg(long, global = true, default_value_t = 100)]
    epochs: usize,
    /// adam or gd.
    #[arg(long, global = true, default_value = "adam")]
    optimizer: Optimizer,
    /// Fixed weight decay; without it the value is chosen on validation accuracy.
    #[arg(long, global = true, conflicts_with = "wd_grid")]
    weight_decay: Option<f64>,
    /// Comma-separated weight-decay candidates.
    #[arg(long, global = true, value_delimiter = ',')]
    wd_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Drop the classifier bias.
    #[arg(long, global = true)]
    no_bias: bool,
    /// Output file (stdout when omitted, except where noted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate features and write the binary feature cache (requires --out).
    Preprocess {
        /// Also write propagated features as CSV: node,label,f0,f1,...
        #[arg(long)]
        features_csv: Option<PathBuf>,
    },
    /// Train the classifier and print the JSON report.
    Train {
        /// Use propagated features from a cache written by `preprocess`.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Write the trained model here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Retrain across values of one parameter.
    /// CSV: param,value,val_acc,test_acc,preprocess_ms,train_ms
    Sweep {
        /// T, K or sigma.
        #[arg(long)]
        param: SweepParam,
        /// a,b,c | start:stop:step | log:start:stop:count
        #[arg(long)]
        values: String,
        /// Search the weight-decay grid at every point instead of once.
        #[arg(long)]
        retune: bool,
    },
    /// DGC versus SGC under Gaussian feature noise, averaged over seeds.
    /// CSV: sigma,seeds,dgc_test_acc,dgc_std,sgc_test_acc,sgc_std
    Noise {
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Steps of the SGC baseline.
        #[arg(long, default_value_t = 2)]
        sgc_k: usize,
    },
    /// Numerical verification suite; exits 1 when any check fails.
    /// CSV: seed,graphs,bound_checks,bound_violations,truncation_violations,
    /// euler_slope,rk4_slope,equilibrium_err,semigroup_err,grad_max_rel_err,pass
    Verify,
    /// Risk and accuracy across candidate terminal times on a corrupted SBM.
    /// CSV: t_hat,risk,val_acc,test_acc
    Risk {
        #[arg(long, default_value = "0:5:0.1")]
        grid: String,
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        #[arg(long, default_value_t = 60)]
        nodes_per_block: usize,
        #[arg(long, default_value_t = 0.2)]
        p_in: f64,
        #[arg(long, default_value_t = 0.02)]
        p_out: f64,
        #[arg(long, default_value_t = 16)]
        feature_dim: usize,
        #[arg(long, default_value_t = 2.0)]
        class_sep: f64,
        #[arg(long, default_value_t = 0.5)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        t_star: f64,
    },
    /// Median preprocessing and training wall time per config.
    /// CSV: config,scheme,laplacian,T,K,preprocess_ms,train_ms,total_ms
    Bench {
        /// Comma-separated scheme:T:K[:laplacian] or sgc:K entries.
        #[arg(long, value_delimiter = ',', default_value = "sgc:2,euler:6:2,euler:6:100")]
        configs: Vec<String>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
}

const DEFAULT_T: f64 = 5.3;
const DEFAULT_SBM_SEED: u64 = 7;
const DEFAULT_FIXED_WD: f64 = 1e-4;

enum Failure {
    Usage(String),
    Verification,
}

impl From<DgcError> for Failure {
    fn from(e: DgcError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl Global {
    fn diffusion(&self) -> Result<DiffusionConfig> {
        let cfg = match self.scheme {
            Scheme::Sgc => {
                if let Some(t) = self.terminal_time {
                    if t != self.steps as f64 {
                        return Err(DgcError::InvalidConfig(format!("sgc requires T = K, got T={t} K={}", self.steps)));
                    }
                }
                DiffusionConfig::sgc(self.steps)
            }
            scheme => DiffusionConfig {
                scheme,
                variant: Variant::Aug,
                terminal_time: self.terminal_time.unwrap_or(DEFAULT_T),
                steps: self.steps,
            },
        };
        let cfg = cfg.with_variant(self.laplacian);
        cfg.validate()?;
        Ok(cfg)
    }

    fn train(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            optimizer: self.optimizer,
            seed: self.seed.unwrap_or(0),
            use_bias: !self.no_bias,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn weight_decay(&self) -> WeightDecay {
        match (&self.weight_decay, &self.wd_grid) {
            (Some(v), _) => WeightDecay::Fixed(*v),
            (None, Some(g)) => WeightDecay::Grid(g.clone()),
            (None, None) => WeightDecay::default(),
        }
    }

    fn dataset(&self) -> Result<data::LabeledDataset> {
        let dir = self.data.as_ref().ok_or_else(|| DgcError::InvalidConfig("--data is required".into()))?;
        data::load_bundle(dir)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Preprocess { features_csv } => {
            let out = g.out.as_ref().ok_or_else(|| Failure::Usage("preprocess requires --out".into()))?;
            let ds = g.dataset()?;
            let cfg = g.diffusion()?;
            let (x, ms) = ex::preprocess(&ds, &cfg)?;
            formats::write_cache(out, &x, &cfg)?;
            if let Some(p) = features_csv {
                write_file(p, &ex::features_csv(&x, &ds.labels))?;
            }
            println!("preprocess_ms={ms:.3}");
        }
        Command::Train { cache, checkpoint } => {
            let ds = g.dataset()?;
            let base = g.train()?;
            let (x, cfg, ms) = match cache {
                Some(p) => {
                    let (x, cfg) = formats::read_cache(p)?;
                    if x.rows() != ds.num_nodes() {
                        return Err(Failure::Usage(format!(
                            "cache has {} rows but the bundle has {} nodes",
                            x.rows(),
                            ds.num_nodes()
                        )));
                    }
                    (x, cfg, 0.0)
                }
                None => {
                    let cfg = g.diffusion()?;
                    let (x, ms) = ex::preprocess(&ds, &cfg)?;
                    (x, cfg, ms)
                }
            };
            let (model, report) = ex::train_propagated(&x, &ds, &cfg, ms, &base, &g.weight_decay())?;
            if let Some(p) = checkpoint {
                formats::write_checkpoint(p, &model)?;
            }
            let mut json = serde_json::to_string_pretty(&report).map_err(DgcError::from)?;
            json.push('\n');
            g.emit(&json)?;
        }
        Command::Sweep { param, values, retune } => {
            let ds = g.dataset()?;
            let base = g.diffusion()?;
            let train = g.train()?;
            let spec = SweepSpec::parse(*param, values)?;
            let wd = match g.weight_decay() {
                WeightDecay::Grid(grid) if !retune => {
                    let (x, _) = ex::preprocess(&ds, &base)?;
                    WeightDecay::Fixed(ex::resolve_weight_decay(&x, &ds, &train, &WeightDecay::Grid(grid))?)
                }
                wd => wd,
            };
            let rows = ex::sweep(&ds, &base, &train, &wd, &spec, g.seed.unwrap_or(0))?;
            g.emit(&ex::sweep_csv(&rows))?;
        }
        Command::Noise { sigmas, seeds, sgc_k } => {
            let ds = g.dataset()?;
            let train = g.train()?;
            let dgc = g.diffusion()?;
            let sgc = DiffusionConfig::sgc(*sgc_k).with_variant(g.laplacian);
            let wd = g.weight_decay();
            let (x, _) = ex::preprocess(&ds, &dgc)?;
            let wd_dgc = ex::resolve_weight_decay(&x, &ds, &train, &wd)?;
            let (x, _) = ex::preprocess(&ds, &sgc)?;
            let wd_sgc = ex::resolve_weight_decay(&x, &ds, &train, &wd)?;
            let base_seed = g.seed.unwrap_or(0);
            let seed_list: Vec<u64> = (0..*seeds).map(|i| base_seed + i).collect();
            let rows = ex::noise_robustness(&ds, (&dgc, wd_dgc), (&sgc, wd_sgc), &train, sigmas, &seed_list)?;
            g.emit(&ex::noise_csv(&rows))?;
        }
        Command::Verify => {
            let report = ex::verify(g.seed.unwrap_or(0))?;
            g.emit(&ex::verify_csv(&report))?;
            if !report.pass {
                return Err(Failure::Verification);
            }
        }
        Command::Risk { grid, blocks, nodes_per_block, p_in, p_out, feature_dim, class_sep, noise_sigma, t_star } => {
            let sbm = SbmConfig {
                blocks: *blocks,
                nodes_per_block: *nodes_per_block,
                p_in: *p_in,
                p_out: *p_out,
                feature_dim: *feature_dim,
                class_sep: *class_sep,
                noise_sigma: *noise_sigma,
                t_star: *t_star,
                seed: g.seed.unwrap_or(DEFAULT_SBM_SEED),
            };
            let grid = SweepSpec::parse(SweepParam::T, grid)?;
            let train = g.train()?;
            let wd = g.weight_decay.unwrap_or(DEFAULT_FIXED_WD);
            let rows = ex::risk_curve(&sbm, &grid.values, &train, wd)?;
            g.emit(&ex::risk_csv(&rows))?;
        }
        Command::Bench { configs, runs } => {
            let ds = g.dataset()?;
            let cfgs: Vec<DiffusionConfig> = configs.iter().map(|c| ex::parse_diffusion(c)).collect::<Result<_>>()?;
            let train = TrainConfig { weight_decay: g.weight_decay.unwrap_or(DEFAULT_FIXED_WD), ..g.train()? };
            let rows = ex::bench(&ds, &cfgs, &train, *runs)?;
            g.emit(&ex::bench_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("dgc: verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("dgc: {msg}");
            ExitCode::from(2)
        }
    }
}
