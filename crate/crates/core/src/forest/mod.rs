//! Random forests grown to pure leaves.
//!
//! Each tree is trained on its own bootstrap sample drawn from stream
//! `mix(seed, tree_index)`, so trees can be built in any order (or in
//! parallel) with identical results. The regressor predicts two targets at
//! once; splits maximize the reduction of the summed SSE of both targets after
//! per-target standardization. The classifier uses Gini impurity and majority
//! voting.

mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::{mix, SplitMix64};
use crate::{fsio, par, Error, Result};

pub use tree::{midpoint, Node, SplitChoice, Tree, GAIN_TIE_TOLERANCE};
use tree::{Builder, GiniReduction, VarianceReduction};

pub const FORMAT_VERSION: u32 = 1;

/// Features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MtryRepr", into = "MtryRepr")]
pub enum Mtry {
    All,
    Count(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MtryRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<MtryRepr> for Mtry {
    type Error = String;
    fn try_from(r: MtryRepr) -> std::result::Result<Self, String> {
        match r {
            MtryRepr::Count(0) => Err("mtry must be >= 1".into()),
            MtryRepr::Count(k) => Ok(Mtry::Count(k)),
            MtryRepr::Name(s) if s == "all" => Ok(Mtry::All),
            MtryRepr::Name(s) => Err(format!("unknown mtry {s:?}")),
        }
    }
}

impl From<Mtry> for MtryRepr {
    fn from(m: Mtry) -> Self {
        match m {
            Mtry::All => MtryRepr::Name("all".into()),
            Mtry::Count(k) => MtryRepr::Count(k),
        }
    }
}

/// Forest hyper-parameters. Trees always grow until their leaves are pure
/// (or cannot be split further).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { n_trees: 1000, mtry: Mtry::All, min_leaf: 1, bootstrap: true, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    fn mtry_count(&self) -> Option<usize> {
        match self.mtry {
            Mtry::All => None,
            Mtry::Count(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression2,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub task: Task,
    pub feature_dim: usize,
    /// Classification only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    /// Per-target standardization used by the split criterion (regression).
    #[serde(default)]
    pub target_means: Vec<f64>,
    #[serde(default)]
    pub target_stds: Vec<f64>,
    pub config: TrainConfig,
    pub trees: Vec<Tree>,
}

fn validate_features(x: &[Vec<f64>], n_targets: usize) -> Result<usize> {
    if x.len() < 2 {
        return Err(Error::EmptyDataset(format!("{} samples; at least 2 are required", x.len())));
    }
    if n_targets != x.len() {
        return Err(Error::DimensionMismatch(format!("{} feature rows vs {n_targets} targets", x.len())));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::DimensionMismatch("feature dimension is 0".into()));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch(format!("row {i} has {} features, expected {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("feature row {i}")));
        }
    }
    Ok(dim)
}

fn tree_rows(config: &TrainConfig, n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    if config.bootstrap {
        (0..n).map(|_| rng.below(n as u64) as usize).collect()
    } else {
        (0..n).collect()
    }
}

/// Mean and population std per target; a zero std (constant target) is
/// replaced by 1.
fn standardization(y: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let n = y.len() as f64;
    let mut means = [0.0; 2];
    let mut stds = [1.0; 2];
    for k in 0..2 {
        if y.iter().all(|r| r[k] == y[0][k]) {
            means[k] = y[0][k];
            continue;
        }
        means[k] = y.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = y.iter().map(|r| (r[k] - means[k]).powi(2)).sum::<f64>() / n;
        stds[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (means, stds)
}

pub fn train_regressor(x: &[Vec<f64>], y: &[[f64; 2]], config: &TrainConfig) -> Result<ForestModel> {
    config.validate()?;
    let dim = validate_features(x, y.len())?;
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("targets".into()));
    }
    let (means, stds) = standardization(y);
    let criterion = VarianceReduction {
        raw: y,
        standardized: y.iter().map(|r| [(r[0] - means[0]) / stds[0], (r[1] - means[1]) / stds[1]]).collect(),
    };
    let builder = Builder { x, criterion: &criterion, mtry: config.mtry_count(), min_leaf: config.min_leaf };
    let trees = par::map_range(config.n_trees, |t| {
        let mut rng = SplitMix64::new(mix(config.seed, t as u64));
        let rows = tree_rows(config, x.len(), &mut rng);
        builder.grow(rows, &mut rng)
    });
    Ok(ForestModel {
        format_version: FORMAT_VERSION,
        task: Task::Regression2,
        feature_dim: dim,
        n_classes: None,
        target_means: means.to_vec(),
        target_stds: stds.to_vec(),
        config: config.clone(),
        trees,
    })
}

pub fn train_classifier(x: &[Vec<f64>], labels: &[usize], config: &TrainConfig) -> Result<ForestModel> {
    config.validate()?;
    let dim = validate_features(x, labels.len())?;
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    let criterion = GiniReduction { labels, n_classes };
    let builder = Builder { x, criterion: &criterion, mtry: config.mtry_count(), min_leaf: config.min_leaf };
    let trees = par::map_range(config.n_trees, |t| {
        let mut rng = SplitMix64::new(mix(config.seed, t as u64));
        let rows = tree_rows(config, x.len(), &mut rng);
        builder.grow(rows, &mut rng)
    });
    Ok(ForestModel {
        format_version: FORMAT_VERSION,
        task: Task::Classification,
        feature_dim: dim,
        n_classes: Some(n_classes),
        target_means: Vec::new(),
        target_stds: Vec::new(),
        config: config.clone(),
        trees,
    })
}

/// Index of the largest count; ties go to the lowest index.
fn argmax_lowest(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl ForestModel {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!("{} features, model expects {}", x.len(), self.feature_dim)));
        }
        Ok(())
    }

    /// Mean of the per-tree leaf vectors.
    pub fn predict_regressor(&self, x: &[f64]) -> Result<[f64; 2]> {
        if self.task != Task::Regression2 {
            return Err(Error::Config("model is not a regressor".into()));
        }
        self.check_input(x)?;
        let mut mean = [0.0f64; 2];
        for (i, tree) in self.trees.iter().enumerate() {
            let Node::Leaf { value } = tree.leaf_for(x) else {
                return Err(Error::Schema("regression tree ends in a class leaf".into()));
            };
            for k in 0..2 {
                mean[k] += (value[k] - mean[k]) / (i + 1) as f64;
            }
        }
        Ok(mean)
    }

    /// Majority vote of the trees' leaf majorities; ties go to the lowest class id.
    pub fn predict_classifier(&self, x: &[f64]) -> Result<usize> {
        let n_classes = match (self.task, self.n_classes) {
            (Task::Classification, Some(k)) => k,
            _ => return Err(Error::Config("model is not a classifier".into())),
        };
        self.check_input(x)?;
        let mut votes = vec![0u32; n_classes];
        for tree in &self.trees {
            let Node::ClassLeaf { counts } = tree.leaf_for(x) else {
                return Err(Error::Schema("classification tree ends in a regression leaf".into()));
            };
            votes[argmax_lowest(counts)] += 1;
        }
        Ok(argmax_lowest(&votes))
    }

    pub fn predict_regressor_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
        par::try_map_slice(xs, |x| self.predict_regressor(x))
    }

    pub fn predict_classifier_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        par::try_map_slice(xs, |x| self.predict_classifier(x))
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec(self).map_err(|e| Error::Schema(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: i64,
        }
        let probe: Probe = serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
        if probe.format_version != i64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch { found: probe.format_version, expected: FORMAT_VERSION });
        }
        let model: ForestModel = serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
        model.validate_structure()?;
        Ok(model)
    }

    fn validate_structure(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Schema("model has no trees".into()));
        }
        if self.task == Task::Regression2 && (self.target_means.len() != 2 || self.target_stds.len() != 2) {
            return Err(Error::Schema("regressor needs two standardization constants per kind".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::Schema(format!("tree {t} is empty")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                let ok = match node {
                    Node::Split { feature, left, right, threshold } => {
                        *feature < self.feature_dim && *left > i && *right > i && *left < n && *right < n && !threshold.is_nan()
                    }
                    Node::Leaf { value } => self.task == Task::Regression2 && value.len() == 2,
                    Node::ClassLeaf { counts } => {
                        self.task == Task::Classification && Some(counts.len()) == self.n_classes
                    }
                };
                if !ok {
                    return Err(Error::Schema(format!("tree {t} node {i} is inconsistent with the model")));
                }
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &ForestModel, path: &Path) -> Result<()> {
    fsio::atomic_write(path, &model.to_json_bytes()?)
}

pub fn load_model(path: &Path) -> Result<ForestModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ForestModel::from_json_bytes(&bytes)
}
