//! Fixed-length image descriptors.
//!
//! The built-in descriptor has 43 entries, in this order:
//!
//! | block | size | content |
//! |-------|------|---------|
//! | intensity histogram | 16 | bins of width 16, normalized to sum 1 |
//! | gradient orientation | 8 | central differences on interior pixels, orientation folded to `[0, π)`, magnitude-weighted, normalized to sum 1 (all zero for flat images) |
//! | co-occurrence | 16 | contrast, correlation, energy, homogeneity of the symmetric normalized GLCM of the 16-level image at offsets (1,0), (0,1), (1,1), (1,-1) |
//! | local variance | 3 | mean windowed variance for windows 3, 7, 15 (windows clipped at the border) |
//!
//! External embeddings (for example a CNN's pooled features) are read from a
//! CSV with header `mls_id,f0,...,f{D-1}`; [`write_features_csv`] emits the
//! same layout so both sources are interchangeable downstream.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use crate::image::GrayImage;
use crate::{fsio, Error, Result};

pub const TEXTURE_DIM: usize = 43;
pub const MIN_SIDE: usize = 8;
const LEVELS: usize = 16;
const ORIENTATION_BINS: usize = 8;
const GLCM_OFFSETS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
const VARIANCE_WINDOWS: [usize; 3] = [3, 7, 15];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    BuiltinTexture,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub source: FeatureSource,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn extract_texture_features(img: &GrayImage) -> Result<FeatureVector> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(Error::ImageTooSmall { width: img.width(), height: img.height() });
    }
    let mut values = Vec::with_capacity(TEXTURE_DIM);
    values.extend(intensity_histogram(img));
    values.extend(orientation_histogram(img));
    for &offset in &GLCM_OFFSETS {
        values.extend(glcm_stats(img, offset));
    }
    values.extend(VARIANCE_WINDOWS.iter().map(|&k| mean_local_variance(img, k)));
    debug_assert_eq!(values.len(), TEXTURE_DIM);
    Ok(FeatureVector { values, source: FeatureSource::BuiltinTexture })
}

fn intensity_histogram(img: &GrayImage) -> [f64; LEVELS] {
    let mut counts = [0u64; LEVELS];
    for &v in img.pixels() {
        counts[usize::from(v >> 4)] += 1;
    }
    let n = img.pixels().len() as f64;
    counts.map(|c| c as f64 / n)
}

fn orientation_histogram(img: &GrayImage) -> [f64; ORIENTATION_BINS] {
    let mut hist = [0.0f64; ORIENTATION_BINS];
    let px = |x: usize, y: usize| f64::from(img.get(x, y));
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let gx = (px(x + 1, y) - px(x - 1, y)) / 2.0;
            let gy = (px(x, y + 1) - px(x, y - 1)) / 2.0;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += PI;
            }
            if theta >= PI {
                theta = 0.0;
            }
            let bin = ((theta / (PI / ORIENTATION_BINS as f64)) as usize).min(ORIENTATION_BINS - 1);
            hist[bin] += mag;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for h in &mut hist {
            *h /= total;
        }
    }
    hist
}

/// `[contrast, correlation, energy, homogeneity]` of the symmetric GLCM.
fn glcm_stats(img: &GrayImage, (dx, dy): (isize, isize)) -> [f64; 4] {
    let mut glcm = [[0u64; LEVELS]; LEVELS];
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut pairs = 0u64;
    for y in 0..h {
        for x in 0..w {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let a = usize::from(img.get(x as usize, y as usize) >> 4);
            let b = usize::from(img.get(nx as usize, ny as usize) >> 4);
            glcm[a][b] += 1;
            glcm[b][a] += 1;
            pairs += 2;
        }
    }
    if pairs == 0 {
        return [0.0; 4];
    }
    let total = pairs as f64;
    let p = |i: usize, j: usize| glcm[i][j] as f64 / total;

    let mut mean = 0.0;
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            mean += i as f64 * p(i, j);
        }
    }
    // Symmetric matrix: row and column marginals coincide.
    let mut var = 0.0;
    let (mut contrast, mut energy, mut homogeneity, mut cov) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            let pij = p(i, j);
            if pij == 0.0 {
                continue;
            }
            let d = i as f64 - j as f64;
            contrast += pij * d * d;
            energy += pij * pij;
            homogeneity += pij / (1.0 + d * d);
            cov += pij * (i as f64 - mean) * (j as f64 - mean);
            var += pij * (i as f64 - mean).powi(2);
        }
    }
    let correlation = if var > 1e-12 { cov / var } else { 0.0 };
    [contrast, correlation, energy, homogeneity]
}

/// Mean over all pixels of the population variance in a `k`×`k` window
/// centered on the pixel, clipped to the image.
fn mean_local_variance(img: &GrayImage, k: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    // Integral images of v and v², exact in u64.
    let stride = w + 1;
    let mut s1 = vec![0u64; stride * (h + 1)];
    let mut s2 = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let (mut r1, mut r2) = (0u64, 0u64);
        for x in 0..w {
            let v = u64::from(img.get(x, y));
            r1 += v;
            r2 += v * v;
            s1[(y + 1) * stride + x + 1] = s1[y * stride + x + 1] + r1;
            s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + r2;
        }
    }
    let rect = |s: &[u64], x0: usize, y0: usize, x1: usize, y1: usize| {
        s[y1 * stride + x1] + s[y0 * stride + x0] - s[y0 * stride + x1] - s[y1 * stride + x0]
    };
    let r = k / 2;
    let mut total = 0.0;
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let n = ((x1 - x0) * (y1 - y0)) as u128;
            let a = u128::from(rect(&s1, x0, y0, x1, y1));
            let b = u128::from(rect(&s2, x0, y0, x1, y1));
            // n·Σv² − (Σv)² ≥ 0 exactly.
            total += (n * b - a * a) as f64 / (n * n) as f64;
        }
    }
    total / (w * h) as f64
}

/// Writes `mls_id,f0,...` rows. All vectors must share one dimension.
pub fn write_features_csv(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut out = String::from("mls_id");
    for i in 0..dim {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (line, (id, values)) in rows.iter().enumerate() {
        if values.len() != dim {
            return Err(Error::RaggedRows { line: line + 2, expected: dim, found: values.len() });
        }
        out.push_str(id);
        for v in values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fsio::atomic_write(path, out.as_bytes())
}

/// Reads a feature CSV. Every id must be in `known_ids` (when given); every row
/// must have as many values as the header declares.
pub fn read_features_csv(path: &Path, known_ids: Option<&HashSet<String>>) -> Result<Vec<(String, FeatureVector)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{other:?}")),
        })?;
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.get(0) != Some("mls_id") {
        return Err(Error::Parse(format!("{}: first column must be mls_id", path.display())));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::Parse(format!("{}: column {} should be f{i}, found {name:?}", path.display(), i + 1)));
        }
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::Parse(format!("{}: no feature columns", path.display())));
    }

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("{}:{line}: {e}", path.display())))?;
        if rec.len() != dim + 1 {
            return Err(Error::RaggedRows { line, expected: dim, found: rec.len().saturating_sub(1) });
        }
        let id = rec[0].to_owned();
        if let Some(known) = known_ids {
            if !known.contains(&id) {
                return Err(Error::UnknownId(id));
            }
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|f| {
                let v: f64 = f.parse().map_err(|_| Error::Parse(format!("{}:{line}: bad number {f:?}", path.display())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteInput(format!("{}:{line}", path.display())))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push((id, FeatureVector { values, source: FeatureSource::Imported }));
    }
    Ok(out)
}

/// Imports external features for the ids of an MLS manifest.
pub fn import_features(path: &Path, manifest: &[crate::labeling::MlsRecord]) -> Result<Vec<(String, FeatureVector)>> {
    let known: HashSet<String> = manifest.iter().map(|r| r.mls_id.clone()).collect();
    read_features_csv(path, Some(&known))
}
