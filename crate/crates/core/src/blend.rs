//! Multi-layer synthetic (MLS) image construction.
//!
//! A stack of same-class layers is blended back-to-front with normalized
//! Fibonacci weights. Bright-spot removal keeps overlapping strands from
//! summing into saturated blobs: pixels already covered by an earlier layer
//! are subtracted from later layers before they are blended in.

use serde::{Deserialize, Serialize};

use crate::forestgen::LayerRecord;
use crate::image::{self, bitwise_and, quantize, saturating_subtract, weighted_add, GrayImage};
use crate::labeling::{self, MlsRecord};
use crate::{Error, Result};

pub const MLS_DIR: &str = "mls";
const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Normalized Fibonacci weights `F_1..F_n / ΣF` with `F_1 = F_2 = 1`.
/// Weights are non-decreasing, so the last (front-most) layer gets the largest.
pub fn fibonacci_weights(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidCount);
    }
    let mut fib: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i < 2 { 1.0 } else { fib[i - 1] + fib[i - 2] };
        fib.push(v);
    }
    let total: f64 = fib.iter().sum();
    Ok(fib.into_iter().map(|f| f / total).collect())
}

/// Checks `weights` against a stack of `layers` images: same count, all
/// positive and finite, non-decreasing, summing to 1.
pub fn validate_weights(weights: &[f64], layers: usize) -> Result<()> {
    if weights.len() != layers {
        return Err(Error::WeightCountMismatch { weights: weights.len(), layers });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
    }
    if weights.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidWeights("weights must be non-decreasing".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Two-image bright-spot removal: AND out the common pixels, subtract them
/// from `b`, then blend.
pub fn blend_pair(a: &GrayImage, b: &GrayImage, wa: f64, wb: f64) -> Result<GrayImage> {
    let common = bitwise_and(a, b)?;
    let b_only = saturating_subtract(b, &common)?;
    weighted_add(a, &b_only, wa, wb)
}

/// Blends `layers` (back to front) with one final quantization.
///
/// With removal on, a running OR mask `M` of everything contributed so far is
/// kept; layer `i` contributes `L_i - (L_i & M)` and then `M |= ` that
/// contribution. For two layers this is exactly [`blend_pair`].
pub fn blend_stack(layers: &[&GrayImage], weights: &[f64], remove_bright_spots: bool) -> Result<GrayImage> {
    let first = *layers.first().ok_or(Error::InvalidCount)?;
    validate_weights(weights, layers.len())?;
    let (w, h) = (first.width(), first.height());
    if let Some(bad) = layers.iter().find(|l| l.width() != w || l.height() != h) {
        return Err(Error::DimensionMismatch(format!("{w}x{h} vs {}x{}", bad.width(), bad.height())));
    }
    let pixels = (0..w * h)
        .map(|p| {
            let mut mask = 0u8;
            let mut acc = 0.0f64;
            for (layer, &weight) in layers.iter().zip(weights) {
                let mut v = layer.pixels()[p];
                if remove_bright_spots {
                    v -= v & mask;
                    mask |= v;
                }
                acc += weight * f64::from(v);
            }
            quantize(acc)
        })
        .collect();
    GrayImage::new(w, h, pixels)
}

/// How one MLS image is assembled from its layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    /// Back to front.
    pub layer_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub apply_bright_spot_removal: bool,
    /// 0 skips the blur.
    pub blur_sigma: f64,
    pub apply_inversion: bool,
}

impl BlendSpec {
    /// Fibonacci-weighted spec over `layer_ids`.
    pub fn fibonacci(layer_ids: Vec<String>, remove: bool, blur_sigma: f64, invert: bool) -> Result<Self> {
        let weights = fibonacci_weights(layer_ids.len())?;
        Ok(Self { layer_ids, weights, apply_bright_spot_removal: remove, blur_sigma, apply_inversion: invert })
    }
}

#[derive(Debug, Clone)]
pub struct MlsSample {
    pub record: MlsRecord,
    pub image: GrayImage,
}

/// Blends, post-processes (blur, then inversion) and labels one stack.
/// `layers` must be given in `spec.layer_ids` order.
pub fn make_mls(spec: &BlendSpec, layers: &[LayerRecord], mls_id: &str) -> Result<MlsSample> {
    if layers.is_empty() {
        return Err(Error::EmptyStack);
    }
    let entries: Vec<_> = layers.iter().map(|l| l.entry.clone()).collect();
    let (class_id, rho) = labeling::validate_stack(&entries)?;
    let ids: Vec<&str> = entries.iter().map(|e| e.layer_id.as_str()).collect();
    if ids != spec.layer_ids.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Config(format!(
            "blend spec lists layers {:?} but {:?} were supplied",
            spec.layer_ids, ids
        )));
    }
    if !(spec.blur_sigma.is_finite() && spec.blur_sigma >= 0.0) {
        return Err(Error::InvalidSigma(spec.blur_sigma));
    }

    let images: Vec<&GrayImage> = layers.iter().map(|l| &l.image).collect();
    let mut img = blend_stack(&images, &spec.weights, spec.apply_bright_spot_removal)?;
    if spec.blur_sigma > 0.0 {
        img = image::gaussian_blur(&img, spec.blur_sigma)?;
    }
    if spec.apply_inversion {
        img = image::invert(&img);
    }

    let f: Vec<f64> = entries.iter().map(|e| e.buckling_load).collect();
    let s: Vec<f64> = entries.iter().map(|e| e.stiffness).collect();
    let record = MlsRecord {
        mls_id: mls_id.to_owned(),
        image_path: format!("{MLS_DIR}/{mls_id}.png"),
        class_id,
        layer_ids: spec.layer_ids.clone(),
        weights: spec.weights.clone(),
        buckling_load: labeling::equivalent_buckling_load(&f, rho)?,
        stiffness: labeling::equivalent_stiffness(&s)?,
        layer_count: layers.len(),
        rho,
    };
    Ok(MlsSample { record, image: img })
}
