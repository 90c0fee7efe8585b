//! Equivalent mechanical labels of a blended stack.
//!
//! `F_eq = (Σ F_i) · (ρ / N) · 100` with the stack's shared areal density ρ,
//! and `S_eq = Σ S_i`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::forestgen::LayerEntry;
use crate::svg::{Scatter, Series};
use crate::{fsio, Error, Result};

/// One line of the MLS manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlsRecord {
    pub mls_id: String,
    pub image_path: String,
    pub class_id: usize,
    pub layer_ids: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(rename = "F_eq")]
    pub buckling_load: f64,
    #[serde(rename = "S_eq")]
    pub stiffness: f64,
    #[serde(rename = "N")]
    pub layer_count: usize,
    pub rho: f64,
}

pub const MLS_MANIFEST: &str = "mls.jsonl";

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyStack);
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonPositiveInput(format!("{what} = {v}")));
    }
    Ok(())
}

pub fn equivalent_buckling_load(loads: &[f64], rho: f64) -> Result<f64> {
    check_positive(loads, "buckling load")?;
    check_positive(&[rho], "rho")?;
    let total: f64 = loads.iter().sum();
    Ok(total * (rho / loads.len() as f64) * 100.0)
}

pub fn equivalent_stiffness(stiffness: &[f64]) -> Result<f64> {
    check_positive(stiffness, "stiffness")?;
    Ok(stiffness.iter().sum())
}

/// Returns the shared `(class_id, rho)` of a stack, or the ids of the layers
/// that disagree with the majority class.
pub fn validate_stack(layers: &[LayerEntry]) -> Result<(usize, f64)> {
    let first = layers.first().ok_or(Error::EmptyStack)?;
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (pos, l) in layers.iter().enumerate() {
        counts.entry(l.class_id).or_insert((0, pos)).0 += 1;
    }
    if counts.len() == 1 {
        return Ok((first.class_id, first.params.areal_density));
    }
    // Majority class; ties go to the class seen first.
    let majority = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(&c, _)| c)
        .unwrap_or(first.class_id);
    let offending = layers
        .iter()
        .filter(|l| l.class_id != majority)
        .map(|l| l.layer_id.clone())
        .collect();
    Err(Error::IncompatibleLayers { offending })
}

/// Writes the layer-vs-MLS label distribution as CSV at `csv_path` and a
/// log-log scatter next to it (same stem, `.svg`).
pub fn emit_distribution_report(records: &[MlsRecord], layers: &[LayerEntry], csv_path: &Path) -> Result<()> {
    if records.is_empty() || layers.is_empty() {
        return Err(Error::Empty);
    }
    let rows = layers
        .iter()
        .map(|l| ("layer", l.buckling_load, l.stiffness))
        .chain(records.iter().map(|r| ("mls", r.buckling_load, r.stiffness)));

    let mut csv = String::from("dataset,buckling_load,stiffness,ln_buckling_load,ln_stiffness\n");
    let mut layer_pts = Vec::new();
    let mut mls_pts = Vec::new();
    for (dataset, f, s) in rows {
        let (lf, ls) = (f.ln(), s.ln());
        csv.push_str(&format!("{dataset},{f},{s},{lf},{ls}\n"));
        if dataset == "layer" { &mut layer_pts } else { &mut mls_pts }.push((lf, ls));
    }
    fsio::atomic_write(csv_path, csv.as_bytes())?;

    let svg = Scatter {
        title: "Buckling load vs stiffness (natural log)".into(),
        x_label: "ln buckling load".into(),
        y_label: "ln stiffness".into(),
        series: vec![
            Series { name: "layer".into(), points: layer_pts },
            Series { name: "mls".into(), points: mls_pts },
        ],
        diagonal: false,
    }
    .render();
    fsio::atomic_write(&csv_path.with_extension("svg"), svg.as_bytes())
}
