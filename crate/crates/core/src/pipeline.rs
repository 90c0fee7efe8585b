//! End-to-end pipeline: generate → blend → report → split → featurize →
//! train → eval, driven by one [`PipelineConfig`] and one master seed.
//!
//! Stage `s` draws from streams `mix3(master_seed, s, item_index)`, with the
//! stage tags below. Stages communicate only through files in `output_dir`:
//!
//! ```text
//! layers.jsonl, layers/*.png        gen
//! mls.jsonl, mls/*.png              blend
//! report/distribution.{csv,svg}     report
//! split.json                        split
//! features/{train,val,test}.csv     featurize
//! models/{regressor,classifier}.json train
//! eval/report.json, eval/*.svg      eval
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blend::{self, BlendSpec};
use crate::features::{self, FeatureVector};
use crate::forest::{self, ForestModel, Mtry, TrainConfig};
use crate::forestgen::{self, LayerEntry, LayerParams, LayerRecord, LAYER_MANIFEST};
use crate::image;
use crate::labeling::{self, MlsRecord, MLS_MANIFEST};
use crate::metrics::{self, ClassificationEval, ConfusionMatrix, EvalReport, EvalResults, SourceEval, TargetEval};
use crate::rng::{mix, mix3, SplitMix64};
use crate::{fsio, par, Error, Result};

pub const STAGE_GEN: u64 = 1;
pub const STAGE_BLEND: u64 = 2;
pub const STAGE_SPLIT: u64 = 3;
pub const STAGE_FEATURIZE: u64 = 4;
pub const STAGE_TRAIN_REGRESSOR: u64 = 5;
pub const STAGE_TRAIN_CLASSIFIER: u64 = 6;

pub const SPLIT_FILE: &str = "split.json";
pub const FEATURE_DIR: &str = "features";
pub const MODEL_DIR: &str = "models";
pub const REGRESSOR_FILE: &str = "models/regressor.json";
pub const CLASSIFIER_FILE: &str = "models/classifier.json";
pub const EVAL_DIR: &str = "eval";
pub const REPORT_DIR: &str = "report";
pub const TARGET_NAMES: [&str; 2] = ["buckling_load", "stiffness"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub grid: Vec<LayerParams>,
    pub layers_per_class: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { grid: forestgen::default_grid(), layers_per_class: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    pub layers_per_stack: usize,
    pub stacks_per_class: usize,
    pub blur_sigma: f64,
    pub invert: bool,
    pub bright_spot_removal: bool,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { layers_per_stack: 4, stacks_per_class: 5, blur_sigma: 1.0, invert: true, bright_spot_removal: true }
    }
}

/// Training images are cropped `train_crops` times at random positions;
/// validation and test images are center-cropped once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub width: usize,
    pub height: usize,
    pub train_crops: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { width: 224, height: 224, train_crops: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2 }
    }
}

/// `builtin` or `import:<csv path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSourceConfig {
    Builtin,
    Import(PathBuf),
}

impl TryFrom<String> for FeatureSourceConfig {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<FeatureSourceConfig> for String {
    fn from(f: FeatureSourceConfig) -> String {
        match f {
            FeatureSourceConfig::Builtin => "builtin".into(),
            FeatureSourceConfig::Import(p) => format!("import:{}", p.display()),
        }
    }
}

impl std::str::FromStr for FeatureSourceConfig {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "builtin" => Ok(Self::Builtin),
            _ => match s.strip_prefix("import:") {
                Some(p) if !p.is_empty() => Ok(Self::Import(PathBuf::from(p))),
                _ => Err(format!("expected `builtin` or `import:PATH`, got {s:?}")),
            },
        }
    }
}

impl FeatureSourceConfig {
    fn label(&self) -> &'static str {
        match self {
            Self::Builtin => "builtin",
            Self::Import(_) => "imported",
        }
    }
}

/// Forest settings; tree seeds are derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub train_classifier: bool,
}

impl Default for RfConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { n_trees: t.n_trees, mtry: t.mtry, min_leaf: t.min_leaf, bootstrap: t.bootstrap, train_classifier: true }
    }
}

impl RfConfig {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { n_trees: self.n_trees, mtry: self.mtry, min_leaf: self.min_leaf, bootstrap: self.bootstrap, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub generator: GeneratorConfig,
    pub blend: BlendConfig,
    pub crop: CropConfig,
    pub split: SplitConfig,
    pub features: FeatureSourceConfig,
    pub rf: RfConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("cntq-out"),
            generator: GeneratorConfig::default(),
            blend: BlendConfig::default(),
            crop: CropConfig::default(),
            split: SplitConfig::default(),
            features: FeatureSourceConfig::Builtin,
            rf: RfConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.generator;
        if g.grid.is_empty() {
            return Err(Error::Config("generator grid is empty".into()));
        }
        for (i, p) in g.grid.iter().enumerate() {
            p.validate().map_err(|e| Error::Config(format!("grid entry {i}: {e}")))?;
            if self.crop.width > p.canvas_width || self.crop.height > p.canvas_height {
                return Err(Error::Config(format!(
                    "crop {}x{} exceeds canvas {}x{} of grid entry {i}",
                    self.crop.width, self.crop.height, p.canvas_width, p.canvas_height
                )));
            }
        }
        let b = &self.blend;
        if b.layers_per_stack == 0 {
            return Err(Error::Config("layers_per_stack must be >= 1".into()));
        }
        if b.stacks_per_class == 0 {
            return Err(Error::Config("stacks_per_class must be >= 1".into()));
        }
        if g.layers_per_class < b.layers_per_stack {
            return Err(Error::Config(format!(
                "layers_per_class ({}) is smaller than layers_per_stack ({})",
                g.layers_per_class, b.layers_per_stack
            )));
        }
        if !(b.blur_sigma.is_finite() && b.blur_sigma >= 0.0) {
            return Err(Error::Config(format!("blur_sigma must be >= 0, got {}", b.blur_sigma)));
        }
        let c = &self.crop;
        if c.width < features::MIN_SIDE || c.height < features::MIN_SIDE || c.train_crops == 0 {
            return Err(Error::Config("crop must be at least 8x8 with train_crops >= 1".into()));
        }
        let s = &self.split;
        let fr = [s.train, s.val, s.test];
        if fr.iter().any(|f| !(f.is_finite() && *f >= 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must be >= 0 and sum to 1, got {fr:?}")));
        }
        if self.rf.n_trees == 0 || self.rf.min_leaf == 0 {
            return Err(Error::Config("rf.n_trees and rf.min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    /// The config as echoed into reports; `output_dir` is left out so reports
    /// do not depend on where a run was written.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        v
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage, source: Box::new(e) },
    })
}

pub fn cmd_gen(cfg: &PipelineConfig) -> Result<Vec<LayerEntry>> {
    cfg.validate()?;
    let g = &cfg.generator;
    let entries = forestgen::generate_dataset(&g.grid, g.layers_per_class, mix(cfg.master_seed, STAGE_GEN), &cfg.output_dir)?;
    log::info!("generated {} layers in {} classes", entries.len(), g.grid.len());
    Ok(entries)
}

fn load_layers(cfg: &PipelineConfig) -> Result<Vec<LayerEntry>> {
    fsio::read_jsonl(&cfg.out(LAYER_MANIFEST))
}

pub fn load_mls_manifest(cfg: &PipelineConfig) -> Result<Vec<MlsRecord>> {
    fsio::read_jsonl(&cfg.out(MLS_MANIFEST))
}

/// The blend specs for every class, in class order. Each stack draws its
/// layers without replacement from its class using stream
/// `mix3(seed, STAGE_BLEND, class_id)`.
pub fn plan_stacks(cfg: &PipelineConfig, layers: &[LayerEntry]) -> Result<Vec<(String, BlendSpec)>> {
    let mut by_class: BTreeMap<usize, Vec<&LayerEntry>> = BTreeMap::new();
    for l in layers {
        by_class.entry(l.class_id).or_default().push(l);
    }
    let b = &cfg.blend;
    let mut plan = Vec::new();
    for (&class_id, members) in &by_class {
        if members.len() < b.layers_per_stack {
            return Err(Error::Config(format!(
                "class {class_id} has {} layers, fewer than layers_per_stack {}",
                members.len(),
                b.layers_per_stack
            )));
        }
        let mut rng = SplitMix64::new(mix3(cfg.master_seed, STAGE_BLEND, class_id as u64));
        for s in 0..b.stacks_per_class {
            let ids = rng
                .sample_indices(members.len(), b.layers_per_stack)
                .into_iter()
                .map(|i| members[i].layer_id.clone())
                .collect();
            let spec = BlendSpec::fibonacci(ids, b.bright_spot_removal, b.blur_sigma, b.invert)?;
            plan.push((format!("c{class_id:02}_m{s:03}"), spec));
        }
    }
    Ok(plan)
}

pub fn cmd_blend(cfg: &PipelineConfig) -> Result<Vec<MlsRecord>> {
    cfg.validate()?;
    let layers = load_layers(cfg)?;
    let plan = plan_stacks(cfg, &layers)?;
    let by_id: HashMap<&str, &LayerEntry> = layers.iter().map(|l| (l.layer_id.as_str(), l)).collect();
    let records = par::try_map_slice(&plan, |(mls_id, spec)| -> Result<MlsRecord> {
        let stack = spec
            .layer_ids
            .iter()
            .map(|id| {
                let entry = *by_id.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))?;
                let image = image::load_png(cfg.out(&entry.image_path))?;
                Ok(LayerRecord { entry: entry.clone(), image })
            })
            .collect::<Result<Vec<_>>>()?;
        let sample = blend::make_mls(spec, &stack, mls_id)?;
        image::save_png(&sample.image, cfg.out(&sample.record.image_path))?;
        Ok(sample.record)
    })?;
    fsio::write_jsonl(&cfg.out(MLS_MANIFEST), &records)?;
    log::info!("blended {} MLS images", records.len());
    Ok(records)
}

/// Writes the layer-vs-MLS label distribution report.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<PathBuf> {
    let layers = load_layers(cfg)?;
    let mls = load_mls_manifest(cfg)?;
    let path = cfg.out(REPORT_DIR).join("distribution.csv");
    labeling::emit_distribution_report(&mls, &layers, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Stratified split. Within each class the ids are shuffled with stream
/// `mix3(seed, STAGE_SPLIT, class_id)`; `floor(val·n)` go to validation,
/// `floor(test·n)` to test and the rest to training.
pub fn split_records(records: &[MlsRecord], fractions: &SplitConfig, seed: u64) -> Result<Split> {
    let mut by_class: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for r in records {
        by_class.entry(r.class_id).or_default().push(r.mls_id.clone());
    }
    let mut split = Split::default();
    for (class_id, mut ids) in by_class {
        let n = ids.len();
        if n < 3 {
            return Err(Error::ClassTooSmall { class_id, count: n });
        }
        ids.sort();
        SplitMix64::new(mix3(seed, STAGE_SPLIT, class_id as u64)).shuffle(&mut ids);
        let n_val = (fractions.val * n as f64).floor() as usize;
        let n_test = (fractions.test * n as f64).floor() as usize;
        let n_train = n - n_val - n_test;
        let mut it = ids.into_iter();
        split.train.extend(it.by_ref().take(n_train));
        split.val.extend(it.by_ref().take(n_val));
        split.test.extend(it);
    }
    split.train.sort();
    split.val.sort();
    split.test.sort();
    Ok(split)
}

pub fn cmd_split(cfg: &PipelineConfig) -> Result<Split> {
    cfg.validate()?;
    let records = load_mls_manifest(cfg)?;
    let split = split_records(&records, &cfg.split, cfg.master_seed)?;
    fsio::write_json(&cfg.out(SPLIT_FILE), &split)?;
    log::info!("split {}/{}/{}", split.train.len(), split.val.len(), split.test.len());
    Ok(split)
}

pub fn load_split(cfg: &PipelineConfig) -> Result<Split> {
    fsio::read_json(&cfg.out(SPLIT_FILE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

fn feature_path(cfg: &PipelineConfig, part: &str) -> PathBuf {
    cfg.out(FEATURE_DIR).join(format!("{part}.csv"))
}

type Rows = Vec<(String, Vec<f64>)>;

fn builtin_rows(cfg: &PipelineConfig, records: &[MlsRecord], split: &Split) -> Result<(Rows, Rows, Rows)> {
    let index: HashMap<&str, (usize, &MlsRecord)> =
        records.iter().enumerate().map(|(i, r)| (r.mls_id.as_str(), (i, r))).collect();
    let lookup = |id: &String| index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownId(id.clone()));
    let c = &cfg.crop;

    let train: Vec<Rows> = par::try_map_slice(&split.train, |id| -> Result<Rows> {
        let (global, rec) = lookup(id)?;
        let img = image::load_png(cfg.out(&rec.image_path))?;
        let mut rng = SplitMix64::new(mix3(cfg.master_seed, STAGE_FEATURIZE, global as u64));
        (0..c.train_crops)
            .map(|_| {
                let crop = image::random_crop(&img, c.width, c.height, &mut rng)?;
                Ok((id.clone(), features::extract_texture_features(&crop)?.values))
            })
            .collect()
    })?;
    let eval = |ids: &[String]| {
        par::try_map_slice(ids, |id| -> Result<(String, Vec<f64>)> {
            let (_, rec) = lookup(id)?;
            let img = image::load_png(cfg.out(&rec.image_path))?;
            let crop = image::center_crop(&img, c.width, c.height)?;
            Ok((id.clone(), features::extract_texture_features(&crop)?.values))
        })
    };
    Ok((train.into_iter().flatten().collect(), eval(&split.val)?, eval(&split.test)?))
}

fn imported_rows(path: &Path, records: &[MlsRecord], split: &Split) -> Result<(Rows, Rows, Rows)> {
    let imported: HashMap<String, FeatureVector> = features::import_features(path, records)?.into_iter().collect();
    let pick = |ids: &[String]| -> Result<Rows> {
        ids.iter()
            .map(|id| {
                let v = imported
                    .get(id)
                    .ok_or_else(|| Error::Parse(format!("{}: no feature row for {id}", path.display())))?;
                Ok((id.clone(), v.values.clone()))
            })
            .collect()
    };
    Ok((pick(&split.train)?, pick(&split.val)?, pick(&split.test)?))
}

pub fn cmd_featurize(cfg: &PipelineConfig) -> Result<FeatureCounts> {
    cfg.validate()?;
    let records = load_mls_manifest(cfg)?;
    let split = load_split(cfg)?;
    let (train, val, test) = match &cfg.features {
        FeatureSourceConfig::Builtin => builtin_rows(cfg, &records, &split)?,
        FeatureSourceConfig::Import(path) => imported_rows(path, &records, &split)?,
    };
    features::write_features_csv(&feature_path(cfg, "train"), &train)?;
    features::write_features_csv(&feature_path(cfg, "val"), &val)?;
    features::write_features_csv(&feature_path(cfg, "test"), &test)?;
    let counts = FeatureCounts { train: train.len(), val: val.len(), test: test.len() };
    log::info!("featurized {counts:?}");
    Ok(counts)
}

/// Feature rows of one split part joined with their labels.
pub struct LabeledRows {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<[f64; 2]>,
    pub class_ids: Vec<usize>,
}

pub fn load_labeled(cfg: &PipelineConfig, part: &str, records: &[MlsRecord]) -> Result<LabeledRows> {
    let by_id: HashMap<&str, &MlsRecord> = records.iter().map(|r| (r.mls_id.as_str(), r)).collect();
    let rows = features::read_features_csv(&feature_path(cfg, part), None)?;
    let mut out = LabeledRows { ids: Vec::new(), x: Vec::new(), y: Vec::new(), class_ids: Vec::new() };
    for (id, fv) in rows {
        let rec = by_id.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))?;
        out.y.push([rec.buckling_load, rec.stiffness]);
        out.class_ids.push(rec.class_id);
        out.x.push(fv.values);
        out.ids.push(id);
    }
    Ok(out)
}

pub struct TrainedModels {
    pub regressor: ForestModel,
    pub classifier: Option<ForestModel>,
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainedModels> {
    cfg.validate()?;
    let records = load_mls_manifest(cfg)?;
    let train = load_labeled(cfg, "train", &records)?;
    let regressor = forest::train_regressor(
        &train.x,
        &train.y,
        &cfg.rf.train_config(mix(cfg.master_seed, STAGE_TRAIN_REGRESSOR)),
    )?;
    forest::save_model(&regressor, &cfg.out(REGRESSOR_FILE))?;
    let classifier = if cfg.rf.train_classifier {
        let m = forest::train_classifier(
            &train.x,
            &train.class_ids,
            &cfg.rf.train_config(mix(cfg.master_seed, STAGE_TRAIN_CLASSIFIER)),
        )?;
        forest::save_model(&m, &cfg.out(CLASSIFIER_FILE))?;
        Some(m)
    } else {
        None
    };
    log::info!("trained {} trees on {} rows", cfg.rf.n_trees, train.x.len());
    Ok(TrainedModels { regressor, classifier })
}

/// Scores one split part with the saved models. Baselines use the mean of the
/// training images' labels.
pub fn evaluate(cfg: &PipelineConfig, part: &str) -> Result<EvalResults> {
    let records = load_mls_manifest(cfg)?;
    let split = load_split(cfg)?;
    let by_id: HashMap<&str, &MlsRecord> = records.iter().map(|r| (r.mls_id.as_str(), r)).collect();
    let train_labels = split
        .train
        .iter()
        .map(|id| by_id.get(id.as_str()).map(|r| [r.buckling_load, r.stiffness]).ok_or_else(|| Error::UnknownId(id.clone())))
        .collect::<Result<Vec<_>>>()?;

    let rows = load_labeled(cfg, part, &records)?;
    let regressor = forest::load_model(&cfg.out(REGRESSOR_FILE))?;
    let predicted = regressor.predict_regressor_batch(&rows.x)?;
    let targets = TARGET_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let train_k: Vec<f64> = train_labels.iter().map(|y| y[k]).collect();
            TargetEval::new(name, &train_k, rows.y.iter().map(|y| y[k]).collect(), predicted.iter().map(|p| p[k]).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let classification = if cfg.rf.train_classifier {
        let classifier = forest::load_model(&cfg.out(CLASSIFIER_FILE))?;
        let predicted = classifier.predict_classifier_batch(&rows.x)?;
        let k = classifier
            .n_classes
            .unwrap_or(0)
            .max(rows.class_ids.iter().max().map_or(0, |m| m + 1));
        Some(ClassificationEval { confusion: ConfusionMatrix::from_predictions(k, &rows.class_ids, &predicted)? })
    } else {
        None
    };

    Ok(EvalResults {
        seed: cfg.master_seed,
        config: cfg.echo(),
        sources: vec![SourceEval { source: cfg.features.label().into(), targets }],
        classification,
    })
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let results = evaluate(cfg, "test")?;
    let report = metrics::emit_eval_report(&results, &cfg.out(EVAL_DIR))?;
    for (name, t) in &report.per_target {
        log::info!("{name}: rmse {:.6} (baseline {:.6})", t.rmse, t.baseline_rmse);
    }
    if let Some(oa) = report.oa {
        log::info!("classification OA {oa:.4}");
    }
    Ok(report)
}

/// Runs every stage in order; the first failure aborts with the stage name.
pub fn run_all(cfg: &PipelineConfig) -> Result<EvalReport> {
    staged("config", cfg.validate())?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    staged("gen", cmd_gen(cfg))?;
    staged("blend", cmd_blend(cfg))?;
    staged("report", cmd_report(cfg))?;
    staged("split", cmd_split(cfg))?;
    staged("featurize", cmd_featurize(cfg))?;
    staged("train", cmd_train(cfg))?;
    staged("eval", cmd_eval(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(per_class: &[usize]) -> Vec<MlsRecord> {
        let mut out = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for s in 0..n {
                out.push(MlsRecord {
                    mls_id: format!("c{c:02}_m{s:03}"),
                    image_path: String::new(),
                    class_id: c,
                    layer_ids: vec![],
                    weights: vec![],
                    buckling_load: 1.0,
                    stiffness: 1.0,
                    layer_count: 4,
                    rho: 1.0,
                });
            }
        }
        out
    }

    #[test]
    fn split_counts_and_partition() {
        let recs = records(&[5; 12]);
        let s = split_records(&recs, &SplitConfig::default(), 9).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (36, 12, 12));
        let mut all: Vec<String> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort();
        let mut expected: Vec<String> = recs.iter().map(|r| r.mls_id.clone()).collect();
        expected.sort();
        assert_eq!(all, expected);
        assert_eq!(s, split_records(&recs, &SplitConfig::default(), 9).unwrap());
        assert_ne!(s, split_records(&recs, &SplitConfig::default(), 10).unwrap());
    }

    #[test]
    fn split_residue_goes_to_train() {
        let s = split_records(&records(&[7]), &SplitConfig::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5, 1, 1));
        assert!(matches!(
            split_records(&records(&[5, 2]), &SplitConfig::default(), 1),
            Err(Error::ClassTooSmall { class_id: 1, count: 2 })
        ));
    }

    #[test]
    fn config_validation() {
        PipelineConfig::default().validate().unwrap();
        let mut c = PipelineConfig::default();
        c.split.val = 0.3;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = PipelineConfig::default();
        c.blend.layers_per_stack = 0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.crop.width = 1000;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.generator.grid.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults_and_feature_source() {
        let c: PipelineConfig = serde_json::from_str(r#"{"master_seed": 5, "features": "import:/tmp/x.csv"}"#).unwrap();
        assert_eq!(c.master_seed, 5);
        assert_eq!(c.features, FeatureSourceConfig::Import(PathBuf::from("/tmp/x.csv")));
        assert_eq!(c.rf.n_trees, 1000);
        assert_eq!(c.generator.grid.len(), 12);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"features": "cnn"}"#).is_err());
        let round: PipelineConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(round, c);
        assert!(c.echo().get("output_dir").is_none());
    }

    #[test]
    fn stack_plan_draws_distinct_layers_within_class() {
        let cfg = PipelineConfig::default();
        let layers: Vec<LayerEntry> = (0..12)
            .flat_map(|c| {
                (0..20).map(move |i| LayerEntry {
                    layer_id: forestgen::layer_id(c, i),
                    class_id: c,
                    image_path: String::new(),
                    params: forestgen::default_grid()[c].clone(),
                    buckling_load: 1.0,
                    stiffness: 1.0,
                    seed: 0,
                })
            })
            .collect();
        let plan = plan_stacks(&cfg, &layers).unwrap();
        assert_eq!(plan.len(), 60);
        for (id, spec) in &plan {
            let class = &id[..3];
            assert_eq!(spec.layer_ids.len(), 4);
            assert!(spec.layer_ids.iter().all(|l| l.starts_with(class)));
            let mut ids = spec.layer_ids.clone();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), 4);
        }
        assert_eq!(plan, plan_stacks(&cfg, &layers).unwrap());
    }
}
