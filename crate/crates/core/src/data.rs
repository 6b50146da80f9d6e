//! Datasets: the on-disk graph bundle, synthetic SBM graphs with
//! reverse-diffusion corruption, and feature preprocessing.
//!
//! A bundle is a directory holding
//!
//! ```text
//! meta.json     {"num_nodes","num_features","num_classes","row_normalize","features_format"}
//! edges.tsv     src \t dst [\t weight], 0-indexed, each undirected pair once
//! features.bin  n*d little-endian f32, row-major      (features_format = "bin")
//! features.tsv  n lines of d tab-separated decimals    (features_format = "tsv")
//! labels.tsv    node \t class, one line per node
//! splits.tsv    node \t train|val|test; absent nodes are in no split
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DgcError, Result};
use crate::graph::{build_graph, normalize, SparseGraph, Variant};
use crate::matrix::FeatureMatrix;
use crate::oracle::{self, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesFormat {
    Bin,
    Tsv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub num_nodes: u64,
    pub num_features: u64,
    pub num_classes: u64,
    pub row_normalize: bool,
    pub features_format: FeaturesFormat,
}

/// Train/validation/test membership, one flag per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Self { train: vec![false; n], val: vec![false; n], test: vec![false; n] }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }

    fn check_disjoint(&self) -> Result<()> {
        for i in 0..self.train.len() {
            if u8::from(self.train[i]) + u8::from(self.val[i]) + u8::from(self.test[i]) > 1 {
                return Err(DgcError::MaskOverlap(i));
            }
        }
        Ok(())
    }
}

/// Graph, features, labels and splits for one node-classification task.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub graph: SparseGraph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub masks: Masks,
    pub num_classes: usize,
    pub meta: BundleMeta,
}

impl LabeledDataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n || self.labels.len() != n {
            return Err(DgcError::SchemaViolation(format!(
                "graph has {n} nodes, features {} rows, labels {}",
                self.features.rows(),
                self.labels.len()
            )));
        }
        if self.masks.train.len() != n || self.masks.val.len() != n || self.masks.test.len() != n {
            return Err(DgcError::SchemaViolation("mask length differs from node count".into()));
        }
        self.masks.check_disjoint()?;
        if let Some(&label) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(DgcError::LabelOutOfRange { label, classes: self.num_classes });
        }
        Ok(())
    }
}

fn required(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(DgcError::MissingFile(p))
    }
}

fn schema(file: &str, line: usize, msg: impl std::fmt::Display) -> DgcError {
    DgcError::SchemaViolation(format!("{file}:{line}: {msg}"))
}

fn parse_field<T: std::str::FromStr>(file: &str, line: usize, field: Option<&str>) -> Result<T> {
    let s = field.ok_or_else(|| schema(file, line, "missing field"))?;
    s.parse().map_err(|_| schema(file, line, format!("cannot parse '{s}'")))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

/// Reads and validates a bundle directory. Features are L1 row-normalized
/// when `meta.json` sets `row_normalize`.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let dir = path.as_ref();
    if !dir.is_dir() {
        return Err(DgcError::MissingFile(dir.to_path_buf()));
    }
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(required(dir, "meta.json")?)?)?;
    let n = meta.num_nodes as usize;
    let d = meta.num_features as usize;
    let c = meta.num_classes as usize;

    let mut edges = Vec::new();
    for (ln, line) in read_lines(&required(dir, "edges.tsv")?)?.iter().enumerate() {
        let mut it = line.split('\t');
        let src: usize = parse_field("edges.tsv", ln + 1, it.next())?;
        let dst: usize = parse_field("edges.tsv", ln + 1, it.next())?;
        let w: f64 = match it.next() {
            Some(s) => parse_field("edges.tsv", ln + 1, Some(s))?,
            None => 1.0,
        };
        if src >= n || dst >= n {
            return Err(schema("edges.tsv", ln + 1, format!("node id out of range for n={n}")));
        }
        edges.push((src, dst, w));
    }
    let graph = build_graph(&edges, n)?;

    let mut features = match meta.features_format {
        FeaturesFormat::Bin => {
            let p = required(dir, "features.bin")?;
            let bytes = fs::read(&p)?;
            if bytes.len() != n * d * 4 {
                return Err(DgcError::SchemaViolation(format!(
                    "features.bin has {} bytes, expected {} for {n}x{d} f32",
                    bytes.len(),
                    n * d * 4
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            FeatureMatrix::from_vec(n, d, data)?
        }
        FeaturesFormat::Tsv => {
            let lines = read_lines(&required(dir, "features.tsv")?)?;
            if lines.len() != n {
                return Err(DgcError::SchemaViolation(format!("features.tsv has {} rows, expected {n}", lines.len())));
            }
            let mut data = Vec::with_capacity(n * d);
            for (ln, line) in lines.iter().enumerate() {
                let before = data.len();
                for tok in line.split('\t') {
                    data.push(parse_field::<f64>("features.tsv", ln + 1, Some(tok))?);
                }
                if data.len() - before != d {
                    return Err(schema("features.tsv", ln + 1, format!("expected {d} columns")));
                }
            }
            FeatureMatrix::from_vec(n, d, data)?
        }
    };
    if !features.is_finite() {
        return Err(DgcError::SchemaViolation("non-finite feature value".into()));
    }
    if meta.row_normalize {
        features = row_normalize(&features);
    }

    let mut labels = vec![None; n];
    for (ln, line) in read_lines(&required(dir, "labels.tsv")?)?.iter().enumerate() {
        let mut it = line.split('\t');
        let node: usize = parse_field("labels.tsv", ln + 1, it.next())?;
        let class: usize = parse_field("labels.tsv", ln + 1, it.next())?;
        if node >= n {
            return Err(schema("labels.tsv", ln + 1, format!("node {node} out of range")));
        }
        if class >= c {
            return Err(schema("labels.tsv", ln + 1, format!("class {class} out of range for C={c}")));
        }
        if labels[node].replace(class).is_some() {
            return Err(schema("labels.tsv", ln + 1, format!("node {node} labelled twice")));
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| DgcError::SchemaViolation(format!("labels.tsv: node {i} has no label"))))
        .collect::<Result<_>>()?;

    let mut masks = Masks::empty(n);
    for (ln, line) in read_lines(&required(dir, "splits.tsv")?)?.iter().enumerate() {
        let mut it = line.split('\t');
        let node: usize = parse_field("splits.tsv", ln + 1, it.next())?;
        if node >= n {
            return Err(schema("splits.tsv", ln + 1, format!("node {node} out of range")));
        }
        let mask = match it.next() {
            Some("train") => &mut masks.train,
            Some("val") => &mut masks.val,
            Some("test") => &mut masks.test,
            other => return Err(schema("splits.tsv", ln + 1, format!("unknown split {other:?}"))),
        };
        if mask[node] {
            return Err(schema("splits.tsv", ln + 1, format!("node {node} listed twice")));
        }
        mask[node] = true;
    }

    let ds = LabeledDataset { graph, features, labels, masks, num_classes: c, meta };
    ds.validate()?;
    Ok(ds)
}

/// Writes `ds` as a bundle. Features are written as held; edge weights are
/// written only when some weight differs from 1.
pub fn write_bundle(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    ds.validate()?;
    let dir = path.as_ref();
    fs::create_dir_all(dir)?;
    let n = ds.num_nodes();

    let mut meta = serde_json::to_string(&ds.meta)?;
    meta.push('\n');
    fs::write(dir.join("meta.json"), meta)?;

    let edges = ds.graph.undirected_edges();
    let weighted = edges.iter().any(|&(_, _, w)| w != 1.0);
    let mut out = std::io::BufWriter::new(fs::File::create(dir.join("edges.tsv"))?);
    for (a, b, w) in edges {
        if weighted {
            writeln!(out, "{a}\t{b}\t{w}")?;
        } else {
            writeln!(out, "{a}\t{b}")?;
        }
    }
    out.flush()?;

    match ds.meta.features_format {
        FeaturesFormat::Bin => {
            let mut bytes = Vec::with_capacity(ds.features.as_slice().len() * 4);
            for &v in ds.features.as_slice() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            fs::write(dir.join("features.bin"), bytes)?;
        }
        FeaturesFormat::Tsv => {
            let mut out = std::io::BufWriter::new(fs::File::create(dir.join("features.tsv"))?);
            for i in 0..n {
                let row: Vec<String> = ds.features.row(i).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", row.join("\t"))?;
            }
            out.flush()?;
        }
    }

    let mut out = std::io::BufWriter::new(fs::File::create(dir.join("labels.tsv"))?);
    for (i, l) in ds.labels.iter().enumerate() {
        writeln!(out, "{i}\t{l}")?;
    }
    out.flush()?;

    let mut out = std::io::BufWriter::new(fs::File::create(dir.join("splits.tsv"))?);
    for i in 0..n {
        let tag = if ds.masks.train[i] {
            "train"
        } else if ds.masks.val[i] {
            "val"
        } else if ds.masks.test[i] {
            "test"
        } else {
            continue;
        };
        writeln!(out, "{i}\t{tag}")?;
    }
    out.flush()?;
    Ok(())
}

/// Scales every row to unit L1 norm; all-zero rows stay zero.
pub fn row_normalize(x: &FeatureMatrix) -> FeatureMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    out
}

/// `x + sigma * G` with `G` i.i.d. standard normal from a ChaCha8 stream
/// seeded by `seed`.
pub fn add_feature_noise(x: &FeatureMatrix, sigma: f64, seed: u64) -> FeatureMatrix {
    let mut out = x.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.as_mut_slice() {
        let g: f64 = rng.sample(StandardNormal);
        *v += sigma * g;
    }
    out
}

/// Erdős–Rényi graph on `n` nodes with unit weights; each pair is an edge
/// with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<SparseGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DgcError::InvalidConfig(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    build_graph(&edges, n)
}

/// Stochastic block model with Gaussian class-mean features corrupted by
/// reverse diffusion for time `t_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Norm of each class mean vector.
    pub class_sep: f64,
    pub noise_sigma: f64,
    pub t_star: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            blocks: 3,
            nodes_per_block: 60,
            p_in: 0.2,
            p_out: 0.02,
            feature_dim: 16,
            class_sep: 2.0,
            noise_sigma: 0.5,
            t_star: 2.0,
            seed: 7,
        }
    }
}

impl SbmConfig {
    pub fn num_nodes(&self) -> usize {
        self.blocks * self.nodes_per_block
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.p_in)
            && (0.0..=1.0).contains(&self.p_out)
            && self.p_out <= self.p_in
            && self.t_star >= 0.0
            && self.noise_sigma >= 0.0
            && self.blocks >= 1
            && self.nodes_per_block >= 1;
        if ok {
            Ok(())
        } else {
            Err(DgcError::InvalidConfig(format!("invalid SBM config {self:?}")))
        }
    }
}

/// Samples an SBM dataset. Returns the dataset holding the corrupted
/// (observed) features and the clean features separately.
///
/// Labels are block ids; the split is 60/20/20 over a seeded shuffle.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<(LabeledDataset, FeatureMatrix)> {
    cfg.validate()?;
    let n = cfg.num_nodes();
    if cfg.t_star > 0.0 && n > DENSE_LIMIT {
        return Err(DgcError::TooLargeForDenseOracle { n, limit: DENSE_LIMIT });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.nodes_per_block).collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = build_graph(&edges, n)?;

    let d = cfg.feature_dim;
    let means: Vec<Vec<f64>> = (0..cfg.blocks)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|a| cfg.class_sep * a / norm).collect()
        })
        .collect();
    let mut clean = FeatureMatrix::zeros(n, d);
    for i in 0..n {
        let mean = &means[labels[i]];
        for (j, v) in clean.row_mut(i).iter_mut().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            *v = mean[j] + cfg.noise_sigma * g;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let mut masks = Masks::empty(n);
    for (pos, &i) in order.iter().enumerate() {
        if pos < n_train {
            masks.train[i] = true;
        } else if pos < n_train + n_val {
            masks.val[i] = true;
        } else {
            masks.test[i] = true;
        }
    }

    let observed = if cfg.t_star == 0.0 {
        clean.clone()
    } else {
        let eig = oracle::laplacian_eigen(&normalize(&graph, Variant::Aug)?)?;
        oracle::inverse_diffusion(&eig, cfg.t_star, &clean)?
    };

    let meta = BundleMeta {
        num_nodes: n as u64,
        num_features: d as u64,
        num_classes: cfg.blocks as u64,
        row_normalize: false,
        features_format: FeaturesFormat::Bin,
    };
    let ds = LabeledDataset { graph, features: observed, labels, masks, num_classes: cfg.blocks, meta };
    ds.validate()?;
    Ok((ds, clean))
}
