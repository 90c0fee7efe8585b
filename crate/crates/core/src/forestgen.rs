//! Procedural 2D CNT-forest layers.
//!
//! Each layer is a black canvas with `n = round(ρ·W/100)` white strands grown
//! upward from the bottom edge. A strand is a polyline of 2 px steps whose
//! heading performs a Gaussian random walk around vertical; its total length
//! is drawn from `Normal(growth_rate_mean, growth_rate_std)` clamped to
//! `[10, H]`. Strokes are binary (0/255) with no anti-aliasing.
//!
//! Labels come from a scaling proxy rather than a mechanics solver:
//! `F = c_F Σ r⁴/h²` (Euler buckling) and `S = c_S Σ r²/h` (axial stiffness),
//! each multiplied by lognormal noise `exp(N(0, 0.05))`.
//!
//! Draw order within a layer stream: for each strand, base x, height, then one
//! heading increment per step; after all strands, the F noise and S noise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fsio;
use crate::image::{self, GrayImage};
use crate::rng::{mix, SplitMix64};
use crate::{par, Error, Result};

pub const DEFAULT_CANVAS_WIDTH: usize = 907;
pub const DEFAULT_CANVAS_HEIGHT: usize = 725;
pub const BUCKLING_CONSTANT: f64 = 1e3;
pub const STIFFNESS_CONSTANT: f64 = 1e2;
pub const LABEL_NOISE_STD: f64 = 0.05;
pub const MIN_STRAND_HEIGHT: f64 = 10.0;
pub const STEP_LENGTH: f64 = 2.0;

fn default_canvas_width() -> usize {
    DEFAULT_CANVAS_WIDTH
}

fn default_canvas_height() -> usize {
    DEFAULT_CANVAS_HEIGHT
}

/// Growth inputs for one class of layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Strands per 100 px of substrate width.
    pub areal_density: f64,
    /// Stroke half-width in px.
    pub radius: f64,
    pub growth_rate_mean: f64,
    pub growth_rate_std: f64,
    /// Per-step heading jitter, radians.
    pub orientation_std: f64,
    #[serde(default = "default_canvas_width")]
    pub canvas_width: usize,
    #[serde(default = "default_canvas_height")]
    pub canvas_height: usize,
}

impl LayerParams {
    pub fn new(areal_density: f64, radius: f64, growth_rate_mean: f64, growth_rate_std: f64, orientation_std: f64) -> Self {
        Self {
            areal_density,
            radius,
            growth_rate_mean,
            growth_rate_std,
            orientation_std,
            canvas_width: DEFAULT_CANVAS_WIDTH,
            canvas_height: DEFAULT_CANVAS_HEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("areal_density", self.areal_density),
            ("radius", self.radius),
            ("growth_rate_mean", self.growth_rate_mean),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("growth_rate_std", self.growth_rate_std), ("orientation_std", self.orientation_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.canvas_width == 0 || (self.canvas_height as f64) < MIN_STRAND_HEIGHT {
            return Err(Error::InvalidParams(format!(
                "canvas {}x{} too small",
                self.canvas_width, self.canvas_height
            )));
        }
        Ok(())
    }

    pub fn strand_count(&self) -> usize {
        (self.areal_density * self.canvas_width as f64 / 100.0).round() as usize
    }

    /// Stroke width in whole pixels, at least 1.
    pub fn stroke_width(&self) -> usize {
        ((2.0 * self.radius).round() as usize).max(1)
    }
}

/// The default 12-class grid: 3 densities × 2 radii × 2 growth distributions.
pub fn default_grid() -> Vec<LayerParams> {
    let mut grid = Vec::with_capacity(12);
    for &density in &[4.0, 12.0, 24.0] {
        for &radius in &[1.0, 2.0] {
            for &growth in &[525.0, 725.0] {
                grid.push(LayerParams::new(density, radius, growth, 0.15 * growth, 0.02));
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strand {
    /// Realized (clamped) length in px.
    pub height: f64,
    /// Polyline vertices in canvas coordinates, starting on the bottom edge.
    pub points: Vec<(f64, f64)>,
}

/// Grows `params.strand_count()` strands from `rng`.
pub fn grow_strands(params: &LayerParams, rng: &mut SplitMix64) -> Vec<Strand> {
    let w = params.canvas_width as f64;
    let h = params.canvas_height as f64;
    (0..params.strand_count())
        .map(|_| {
            let base_x = rng.next_f64() * w;
            let height = rng
                .normal(params.growth_rate_mean, params.growth_rate_std)
                .clamp(MIN_STRAND_HEIGHT, h);
            let mut points = Vec::with_capacity((height / STEP_LENGTH).ceil() as usize + 1);
            let (mut x, mut y, mut heading) = (base_x, h, 0.0f64);
            points.push((x, y));
            let mut remaining = height;
            while remaining > 0.0 {
                heading += rng.normal(0.0, params.orientation_std);
                let step = remaining.min(STEP_LENGTH);
                x += step * heading.sin();
                y -= step * heading.cos();
                points.push((x, y));
                remaining -= step;
            }
            Strand { height, points }
        })
        .collect()
}

/// Squared distance from `p` to segment `ab`.
fn dist2_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - cx).powi(2) + (p.1 - cy).powi(2)
}

/// Draws strands in white on black. A pixel is lit when its center lies within
/// half the stroke width of any segment.
pub fn rasterize(params: &LayerParams, strands: &[Strand]) -> GrayImage {
    let (w, h) = (params.canvas_width, params.canvas_height);
    let mut img = GrayImage::filled(w, h, 0);
    let half = params.stroke_width() as f64 / 2.0;
    let half2 = half * half;
    for strand in strands {
        for seg in strand.points.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let x_lo = (a.0.min(b.0) - half).floor().max(0.0) as usize;
            let x_hi = (a.0.max(b.0) + half).ceil().min(w as f64) as usize;
            let y_lo = (a.1.min(b.1) - half).floor().max(0.0) as usize;
            let y_hi = (a.1.max(b.1) + half).ceil().min(h as f64) as usize;
            for py in y_lo..y_hi {
                for px in x_lo..x_hi {
                    if dist2_to_segment((px as f64 + 0.5, py as f64 + 0.5), a, b) <= half2 {
                        img.set(px, py, 255);
                    }
                }
            }
        }
    }
    img
}

/// Buckling load and stiffness of a layer from its realized strand heights.
/// Pass `None` for `noise` to get the noiseless proxy.
pub fn physics_proxy(params: &LayerParams, heights: &[f64], noise: Option<&mut SplitMix64>) -> Result<(f64, f64)> {
    if heights.is_empty() {
        return Err(Error::EmptyLayer);
    }
    let r2 = params.radius * params.radius;
    let mut f: f64 = heights.iter().map(|h| r2 * r2 / (h * h)).sum::<f64>() * BUCKLING_CONSTANT;
    let mut s: f64 = heights.iter().map(|h| r2 / h).sum::<f64>() * STIFFNESS_CONSTANT;
    if let Some(rng) = noise {
        f *= rng.normal(0.0, LABEL_NOISE_STD).exp();
        s *= rng.normal(0.0, LABEL_NOISE_STD).exp();
    }
    Ok((f, s))
}

#[derive(Debug, Clone)]
pub struct GeneratedLayer {
    pub image: GrayImage,
    pub buckling_load: f64,
    pub stiffness: f64,
    pub heights: Vec<f64>,
}

/// Renders one layer and its labels from `(params, seed)`.
pub fn generate_layer(params: &LayerParams, seed: u64) -> Result<GeneratedLayer> {
    params.validate()?;
    let mut rng = SplitMix64::new(seed);
    let strands = grow_strands(params, &mut rng);
    let heights: Vec<f64> = strands.iter().map(|s| s.height).collect();
    let (buckling_load, stiffness) = physics_proxy(params, &heights, Some(&mut rng))?;
    let image = rasterize(params, &strands);
    Ok(GeneratedLayer { image, buckling_load, stiffness, heights })
}

/// One line of the layer manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub layer_id: String,
    pub class_id: usize,
    /// Relative to the manifest's directory.
    pub image_path: String,
    pub params: LayerParams,
    #[serde(rename = "F_i")]
    pub buckling_load: f64,
    #[serde(rename = "S_i")]
    pub stiffness: f64,
    pub seed: u64,
}

/// A manifest entry together with its pixels.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    pub entry: LayerEntry,
    pub image: GrayImage,
}

pub const LAYER_MANIFEST: &str = "layers.jsonl";
pub const LAYER_DIR: &str = "layers";

pub fn layer_id(class_id: usize, index: usize) -> String {
    format!("c{class_id:02}_l{index:03}")
}

/// Generates `layers_per_class` layers for every grid entry under `out_dir`,
/// writing `layers/<id>.png` and `layers.jsonl`. Layer `g` (global index,
/// class-major) uses seed `mix(master_seed, g)`.
pub fn generate_dataset(
    grid: &[LayerParams],
    layers_per_class: usize,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Vec<LayerEntry>> {
    if grid.is_empty() {
        return Err(Error::Config("generator grid is empty".into()));
    }
    if layers_per_class == 0 {
        return Err(Error::Config("layers_per_class must be >= 1".into()));
    }
    for p in grid {
        p.validate()?;
    }
    let total = grid.len() * layers_per_class;
    let entries = par::try_map_range(total, |g| -> Result<LayerEntry> {
        let class_id = g / layers_per_class;
        let params = &grid[class_id];
        let seed = mix(master_seed, g as u64);
        let layer = generate_layer(params, seed)?;
        let id = layer_id(class_id, g % layers_per_class);
        let image_path = format!("{LAYER_DIR}/{id}.png");
        image::save_png(&layer.image, out_dir.join(&image_path))?;
        Ok(LayerEntry {
            layer_id: id,
            class_id,
            image_path,
            params: params.clone(),
            buckling_load: layer.buckling_load,
            stiffness: layer.stiffness,
            seed,
        })
    })?;
    fsio::write_jsonl(&out_dir.join(LAYER_MANIFEST), &entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(density: f64) -> LayerParams {
        LayerParams { canvas_width: 120, canvas_height: 90, ..LayerParams::new(density, 1.0, 60.0, 10.0, 0.05) }
    }

    #[test]
    fn strand_count_rounding() {
        assert_eq!(LayerParams::new(50.0, 1.0, 100.0, 1.0, 0.0).strand_count(), 454);
        assert_eq!(small(0.4).strand_count(), 0);
    }

    #[test]
    fn empty_layer_is_black_and_rejected() {
        let p = small(0.4);
        let mut rng = SplitMix64::new(1);
        let strands = grow_strands(&p, &mut rng);
        assert!(strands.is_empty());
        assert!(rasterize(&p, &strands).pixels().iter().all(|&v| v == 0));
        assert!(matches!(generate_layer(&p, 1), Err(Error::EmptyLayer)));
    }

    #[test]
    fn proxy_formula() {
        let p = LayerParams::new(1.0, 1.0, 100.0, 0.0, 0.0);
        let (f, s) = physics_proxy(&p, &[100.0], None).unwrap();
        assert_eq!(f, 0.1);
        assert_eq!(s, 1.0);
        let p2 = LayerParams { radius: 2.0, ..p.clone() };
        let (f2, s2) = physics_proxy(&p2, &[100.0], None).unwrap();
        assert_eq!(f2, 16.0 * f);
        assert_eq!(s2, 4.0 * s);
        assert!(matches!(physics_proxy(&p, &[], None), Err(Error::EmptyLayer)));
    }

    #[test]
    fn proxy_monotonicity() {
        let base = LayerParams::new(1.0, 1.0, 100.0, 0.0, 0.0);
        let heights = [40.0, 80.0, 120.0];
        let (f0, s0) = physics_proxy(&base, &heights, None).unwrap();
        let bigger = LayerParams { radius: 1.3, ..base.clone() };
        let (f1, s1) = physics_proxy(&bigger, &heights, None).unwrap();
        assert!(f1 > f0 && s1 > s0);
        for i in 0..heights.len() {
            let mut taller = heights;
            taller[i] += 5.0;
            let (f2, s2) = physics_proxy(&base, &taller, None).unwrap();
            assert!(f2 < f0 && s2 < s0);
        }
    }

    #[test]
    fn layers_are_binary_and_deterministic() {
        let p = small(20.0);
        let a = generate_layer(&p, 42).unwrap();
        let b = generate_layer(&p, 42).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.buckling_load.to_bits(), b.buckling_load.to_bits());
        assert_eq!(a.stiffness.to_bits(), b.stiffness.to_bits());
        assert!(a.image.pixels().iter().all(|&v| v == 0 || v == 255));
        assert!(a.image.pixels().contains(&255));
        assert_eq!(a.heights.len(), p.strand_count());
        assert!(a.heights.iter().all(|&h| (MIN_STRAND_HEIGHT..=90.0).contains(&h)));
        assert!(a.buckling_load > 0.0 && a.stiffness > 0.0);
        let c = generate_layer(&p, 43).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn strands_start_on_bottom_edge_with_requested_length() {
        let p = small(10.0);
        let strands = grow_strands(&p, &mut SplitMix64::new(9));
        for s in &strands {
            assert_eq!(s.points[0].1, 90.0);
            let len: f64 = s.points.windows(2).map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt()).sum();
            assert!((len - s.height).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_strand_raster_width() {
        let p = LayerParams { canvas_width: 10, canvas_height: 20, ..LayerParams::new(10.0, 1.0, 10.0, 0.0, 0.0) };
        let s = Strand { height: 10.0, points: vec![(5.0, 20.0), (5.0, 10.0)] };
        let img = rasterize(&p, &[s]);
        // stroke width 2 centered on x = 5 covers pixel columns 4 and 5.
        for y in 10..20 {
            let lit: Vec<usize> = (0..10).filter(|&x| img.get(x, y) == 255).collect();
            assert_eq!(lit, vec![4, 5], "row {y}");
        }
        assert_eq!(img.get(5, 5), 0);
    }

    #[test]
    fn invalid_params() {
        let mut p = small(10.0);
        p.radius = 0.0;
        assert!(matches!(generate_layer(&p, 1), Err(Error::InvalidParams(_))));
        let mut p = small(10.0);
        p.growth_rate_std = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn default_grid_has_twelve_distinct_classes() {
        let g = default_grid();
        assert_eq!(g.len(), 12);
        for (i, a) in g.iter().enumerate() {
            a.validate().unwrap();
            assert_eq!((a.canvas_width, a.canvas_height), (907, 725));
            for b in &g[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }
}
