//! Evaluation metrics and the evaluation report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::svg::{BarChart, Scatter, Series};
use crate::{fsio, Error, Result};

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!("confusion matrix rows must have {k} entries")));
        }
        Ok(Self { counts })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch(truth.len(), predicted.len()));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.classes();
        if truth >= k || predicted >= k {
            return Err(Error::DimensionMismatch(format!("class {} outside 0..{k}", truth.max(predicted))));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Trace over the sum of all entries.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let trace: u64 = (0..cm.classes()).map(|k| cm.counts[k][k]).sum();
    Ok(trace as f64 / total as f64)
}

pub fn rmse(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty);
    }
    let sse: f64 = truth.iter().zip(predicted).map(|(y, x)| (y - x) * (y - x)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// RMSE on `test` of the constant predictor `mean(train)`.
pub fn baseline_rmse(train: &[f64], test: &[f64]) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty);
    }
    let mean = train.iter().sum::<f64>() / train.len() as f64;
    rmse(test, &vec![mean; test.len()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEval {
    pub name: String,
    pub rmse: f64,
    pub baseline_rmse: f64,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl TargetEval {
    pub fn new(name: &str, train_truth: &[f64], truth: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        Ok(Self {
            name: name.to_owned(),
            rmse: rmse(&truth, &predicted)?,
            baseline_rmse: baseline_rmse(train_truth, &truth)?,
            truth,
            predicted,
        })
    }
}

/// Regression results for one feature source (e.g. "builtin" or an imported embedding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEval {
    pub source: String,
    pub targets: Vec<TargetEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationEval {
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResults {
    pub seed: u64,
    pub config: serde_json::Value,
    /// The first source populates the report's `per_target` block.
    pub sources: Vec<SourceEval>,
    pub classification: Option<ClassificationEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub rmse: f64,
    pub baseline_rmse: f64,
}

/// The JSON evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub per_target: BTreeMap<String, TargetSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
    pub sources: BTreeMap<String, BTreeMap<String, TargetSummary>>,
    pub config: serde_json::Value,
    pub seed: u64,
}

fn summaries(source: &SourceEval) -> BTreeMap<String, TargetSummary> {
    source
        .targets
        .iter()
        .map(|t| (t.name.clone(), TargetSummary { rmse: t.rmse, baseline_rmse: t.baseline_rmse }))
        .collect()
}

pub fn build_report(results: &EvalResults) -> Result<EvalReport> {
    let primary = results.sources.first().ok_or(Error::Empty)?;
    let (task, oa, confusion) = match &results.classification {
        Some(c) => (
            "regression2+classification",
            Some(overall_accuracy(&c.confusion)?),
            Some(c.confusion.counts().to_vec()),
        ),
        None => ("regression2", None, None),
    };
    Ok(EvalReport {
        task: task.into(),
        per_target: summaries(primary),
        oa,
        confusion,
        sources: results.sources.iter().map(|s| (s.source.clone(), summaries(s))).collect(),
        config: results.config.clone(),
        seed: results.seed,
    })
}

/// Writes `report.json`, `rmse.svg` (bars per source and target) and
/// `scatter_<target>.svg` (predicted vs true, primary source) into `dir`.
pub fn emit_eval_report(results: &EvalResults, dir: &Path) -> Result<EvalReport> {
    let report = build_report(results)?;
    fsio::write_json(&dir.join("report.json"), &report)?;

    let primary = &results.sources[0];
    let bars = BarChart {
        title: "Test RMSE by feature source".into(),
        y_label: "RMSE".into(),
        groups: results
            .sources
            .iter()
            .map(|s| (s.source.clone(), s.targets.iter().map(|t| t.rmse).collect()))
            .collect(),
        bar_names: primary.targets.iter().map(|t| t.name.clone()).collect(),
    };
    fsio::atomic_write(&dir.join("rmse.svg"), bars.render().as_bytes())?;

    for t in &primary.targets {
        let scatter = Scatter {
            title: format!("{}: predicted vs true", t.name),
            x_label: "true".into(),
            y_label: "predicted".into(),
            series: vec![Series {
                name: primary.source.clone(),
                points: t.truth.iter().copied().zip(t.predicted.iter().copied()).collect(),
            }],
            diagonal: true,
        };
        fsio::atomic_write(&dir.join(format!("scatter_{}.svg", t.name)), scatter.render().as_bytes())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        let cm = ConfusionMatrix::from_counts(vec![vec![5, 1], vec![2, 4]]).unwrap();
        assert_eq!(overall_accuracy(&cm).unwrap(), 0.75);
        let diag = ConfusionMatrix::from_counts(vec![vec![3, 0, 0], vec![0, 1, 0], vec![0, 0, 9]]).unwrap();
        assert_eq!(overall_accuracy(&diag).unwrap(), 1.0);
        let off = ConfusionMatrix::from_counts(vec![vec![0, 4], vec![2, 0]]).unwrap();
        assert_eq!(overall_accuracy(&off).unwrap(), 0.0);
        assert!(matches!(overall_accuracy(&ConfusionMatrix::new(3)), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn confusion_from_predictions() {
        let cm = ConfusionMatrix::from_predictions(3, &[0, 1, 2, 2], &[0, 2, 2, 1]).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 0, 0], vec![0, 0, 1], vec![0, 1, 1]]);
        assert_eq!(cm.total(), 4);
        assert!(ConfusionMatrix::from_predictions(2, &[0, 2], &[0, 1]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0], &[5.0]).unwrap(), 2.0);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(rmse(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_rmse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(baseline_rmse(&[0.0, 0.0], &[3.0]).unwrap(), 3.0);
        assert_eq!(baseline_rmse(&[4.0; 5], &[4.0; 3]).unwrap(), 0.0);
        assert!(matches!(baseline_rmse(&[], &[1.0]), Err(Error::Empty)));
    }

    fn results(sources: usize, classification: bool) -> EvalResults {
        let mk = |name: &str, shift: f64| {
            TargetEval::new(name, &[1.0, 3.0], vec![1.0, 2.0, 3.0], vec![1.0 + shift, 2.0, 3.5]).unwrap()
        };
        EvalResults {
            seed: 7,
            config: serde_json::json!({"n_trees": 10}),
            sources: (0..sources)
                .map(|i| SourceEval {
                    source: format!("src{i}"),
                    targets: vec![mk("buckling_load", i as f64), mk("stiffness", 0.0)],
                })
                .collect(),
            classification: classification.then(|| ClassificationEval {
                confusion: ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]).unwrap(),
            }),
        }
    }

    #[test]
    fn regression_only_report_has_no_classification_block() {
        let dir = tempfile::tempdir().unwrap();
        emit_eval_report(&results(1, false), dir.path()).unwrap();
        let v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
        assert!(v.get("oa").is_none() && v.get("confusion").is_none());
        assert_eq!(v["task"], "regression2");
        assert!(v["per_target"]["buckling_load"]["baseline_rmse"].is_number());
        assert!(v["per_target"]["stiffness"]["rmse"].is_number());
        assert_eq!(v["seed"], 7);
    }

    #[test]
    fn report_with_two_sources_and_classification() {
        let dir = tempfile::tempdir().unwrap();
        let report = emit_eval_report(&results(2, true), dir.path()).unwrap();
        assert_eq!(report.oa, Some(5.0 / 6.0));
        assert_eq!(report.sources.len(), 2);
        let svg = std::fs::read_to_string(dir.path().join("rmse.svg")).unwrap();
        assert_eq!(svg.matches("<rect x=").count() - 2, 4, "2 groups x 2 targets plus 2 legend swatches");
        assert!(dir.path().join("scatter_stiffness.svg").exists());

        let first = std::fs::read(dir.path().join("report.json")).unwrap();
        emit_eval_report(&results(2, true), dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("report.json")).unwrap(), first);
    }

    proptest! {
        #[test]
        fn rmse_properties(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30),
            c in -10.0f64..10.0,
        ) {
            let (y, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = rmse(&y, &x).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert_eq!(r, rmse(&x, &y).unwrap());
            prop_assert_eq!(rmse(&y, &y).unwrap(), 0.0);
            let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
            let xs: Vec<f64> = x.iter().map(|v| c * v).collect();
            prop_assert!((rmse(&ys, &xs).unwrap() - c.abs() * r).abs() <= 1e-9 * (1.0 + c.abs() * r));
        }

        #[test]
        fn accuracy_in_unit_interval(counts in proptest::collection::vec(0u64..20, 9)) {
            let rows: Vec<Vec<u64>> = counts.chunks(3).map(|c| c.to_vec()).collect();
            let cm = ConfusionMatrix::from_counts(rows.clone()).unwrap();
            if cm.total() > 0 {
                let oa = overall_accuracy(&cm).unwrap();
                prop_assert!((0.0..=1.0).contains(&oa));
                let off_diag: u64 = (0..3).flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| rows[i][j]).sum();
                prop_assert_eq!(oa == 1.0, off_diag == 0);
            }
        }
    }
}
