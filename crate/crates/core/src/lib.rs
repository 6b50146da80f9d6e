//! Decoupled graph convolution.
//!
//! Node features are propagated by integrating the graph heat equation
//! `dX/dt = -L X` up to a terminal time `T` in `K` steps, then classified by
//! a linear softmax model. Terminal time and step count are independent knobs.
//!
//! ```no_run
//! use dgc::{data, diffusion, graph, classifier};
//!
//! let ds = data::load_bundle("data/cora").unwrap();
//! let s = graph::normalize(&ds.graph, graph::Variant::Aug).unwrap();
//! let cfg = diffusion::DiffusionConfig::euler(5.3, 250);
//! let x = diffusion::propagate(&ds.features, &s, &cfg).unwrap();
//! let (_, report) = classifier::train(&x, &ds, &classifier::TrainConfig::default()).unwrap();
//! println!("test accuracy {:.3}", report.final_test_acc);
//! ```

pub mod classifier;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod graph;
pub mod matrix;
pub mod oracle;

pub use error::{DgcError, Result};
pub use matrix::FeatureMatrix;
