use std::path::Path;

use cntq_core::forestgen::LayerParams;
use cntq_core::image;
use cntq_core::pipeline::{self, FeatureSourceConfig, PipelineConfig};
use cntq_core::{features, fsio, Error, ErrorKind};

/// Three small classes on a 120x96 canvas; fast enough for every stage.
fn small_config(dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { output_dir: dir.to_path_buf(), master_seed: 7, ..PipelineConfig::default() };
    cfg.generator.grid = [(6.0, 1.0, 60.0), (20.0, 1.0, 80.0), (12.0, 2.0, 90.0)]
        .iter()
        .map(|&(rho, r, g)| LayerParams { canvas_width: 120, canvas_height: 96, ..LayerParams::new(rho, r, g, 0.1 * g, 0.02) })
        .collect();
    cfg.generator.layers_per_class = 6;
    cfg.crop.width = 48;
    cfg.crop.height = 48;
    cfg.rf.n_trees = 5;
    cfg
}

#[test]
fn stages_produce_expected_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(pipeline::cmd_gen(&cfg).unwrap().len(), 18);
    let mls = pipeline::cmd_blend(&cfg).unwrap();
    assert_eq!(mls.len(), 15);
    for r in &mls {
        assert_eq!(r.layer_count, 4);
        assert!(r.layer_ids.iter().all(|id| id.starts_with(&format!("c{:02}", r.class_id))));
        assert!(dir.path().join(&r.image_path).exists());
    }
    let split = pipeline::cmd_split(&cfg).unwrap();
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (9, 3, 3));
    let counts = pipeline::cmd_featurize(&cfg).unwrap();
    assert_eq!((counts.train, counts.val, counts.test), (36, 3, 3));
    let models = pipeline::cmd_train(&cfg).unwrap();
    assert_eq!(models.regressor.trees.len(), 5);
    assert_eq!(models.classifier.as_ref().unwrap().n_classes, Some(3));
    let report = pipeline::cmd_eval(&cfg).unwrap();
    assert_eq!(report.per_target.len(), 2);
    assert!(report.per_target.values().all(|t| t.baseline_rmse > 0.0));
    for f in ["eval/report.json", "eval/rmse.svg", "eval/scatter_buckling_load.svg", "eval/scatter_stiffness.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = pipeline::cmd_report(&cfg).unwrap();
    assert!(csv.exists() && csv.with_extension("svg").exists());
}

#[test]
fn single_layer_stack_passes_through() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.blend.layers_per_stack = 1;
    cfg.blend.blur_sigma = 0.0;
    cfg.blend.invert = false;
    pipeline::cmd_gen(&cfg).unwrap();
    for r in pipeline::cmd_blend(&cfg).unwrap() {
        let layer = fsio::read_jsonl::<cntq_core::forestgen::LayerEntry>(&dir.path().join("layers.jsonl"))
            .unwrap()
            .into_iter()
            .find(|l| l.layer_id == r.layer_ids[0])
            .unwrap();
        let a = image::load_png(dir.path().join(&r.image_path)).unwrap();
        let b = image::load_png(dir.path().join(&layer.image_path)).unwrap();
        assert_eq!(a, b);
        assert_eq!(r.stiffness, layer.stiffness);
    }
}

#[test]
fn memorizing_forest_fits_the_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.rf.n_trees = 1;
    cfg.rf.bootstrap = false;
    cfg.crop.train_crops = 1;
    pipeline::run_all(&cfg).unwrap();
    let results = pipeline::evaluate(&cfg, "train").unwrap();
    for t in &results.sources[0].targets {
        assert_eq!(t.rmse, 0.0, "{}", t.name);
    }
}

#[test]
fn imported_features_replace_builtin_ones() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    pipeline::cmd_gen(&cfg).unwrap();
    let mls = pipeline::cmd_blend(&cfg).unwrap();
    pipeline::cmd_split(&cfg).unwrap();
    let rows: Vec<(String, Vec<f64>)> =
        mls.iter().map(|r| (r.mls_id.clone(), vec![r.class_id as f64, r.rho, 1.0])).collect();
    let csv = dir.path().join("external.csv");
    features::write_features_csv(&csv, &rows).unwrap();
    cfg.features = FeatureSourceConfig::Import(csv.clone());
    let counts = pipeline::cmd_featurize(&cfg).unwrap();
    assert_eq!((counts.train, counts.val, counts.test), (9, 3, 3));
    pipeline::cmd_train(&cfg).unwrap();
    let report = pipeline::cmd_eval(&cfg).unwrap();
    assert!(report.sources.contains_key("imported"));
    // Class id is a feature, so classification is perfect.
    assert_eq!(report.oa, Some(1.0));

    features::write_features_csv(&csv, &rows[1..]).unwrap();
    let err = pipeline::cmd_featurize(&cfg).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn failures_carry_the_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path().join("missing/out").as_path());
    cfg.blend.stacks_per_class = 2;
    let err = pipeline::run_all(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, source } => {
            assert_eq!(*stage, "split");
            assert!(matches!(**source, Error::ClassTooSmall { count: 2, .. }));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(dir.path().join("missing/out/layers.jsonl").exists());

    let mut cfg = small_config(dir.path());
    cfg.split.test = 0.5;
    let err = pipeline::run_all(&cfg).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn stage_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let cfg = small_config(d);
        pipeline::cmd_gen(&cfg).unwrap();
        pipeline::cmd_blend(&cfg).unwrap();
        pipeline::cmd_split(&cfg).unwrap();
        pipeline::cmd_featurize(&cfg).unwrap();
        pipeline::cmd_train(&cfg).unwrap();
    }
    for f in ["layers.jsonl", "mls.jsonl", "split.json", "features/train.csv", "models/regressor.json", "models/classifier.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let mut other = small_config(b.path());
    other.master_seed = 8;
    pipeline::cmd_gen(&other).unwrap();
    assert_ne!(std::fs::read(a.path().join("layers.jsonl")).unwrap(), std::fs::read(b.path().join("layers.jsonl")).unwrap());
}

#[test]
fn manifests_round_trip_labels_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let layers = pipeline::cmd_gen(&cfg).unwrap();
    let mls = pipeline::cmd_blend(&cfg).unwrap();
    let layers_back: Vec<cntq_core::forestgen::LayerEntry> = fsio::read_jsonl(&dir.path().join("layers.jsonl")).unwrap();
    assert_eq!(layers_back, layers);
    assert_eq!(pipeline::load_mls_manifest(&cfg).unwrap(), mls);
    for r in &mls {
        let f: Vec<f64> = r
            .layer_ids
            .iter()
            .map(|id| layers.iter().find(|l| &l.layer_id == id).unwrap().buckling_load)
            .collect();
        assert_eq!(r.buckling_load, cntq_core::labeling::equivalent_buckling_load(&f, r.rho).unwrap());
    }
}
