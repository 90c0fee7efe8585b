//! 8-bit grayscale rasters and the pixel operations used by the blending and
//! post-processing stages.
//!
//! Every operation takes its inputs by reference and returns a new image.
//! Quantization always rounds half away from zero (`f64::round`).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Row-major 8-bit single-channel image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A `width`×`height` image with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "zero-sized image");
        Self { width, height, pixels: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "zero-sized image");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    fn check_same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    fn zip_map(&self, other: &GrayImage, f: impl Fn(u8, u8) -> u8) -> Result<GrayImage> {
        self.check_same_dims(other)?;
        let pixels = self.pixels.iter().zip(&other.pixels).map(|(&a, &b)| f(a, b)).collect();
        Ok(GrayImage { width: self.width, height: self.height, pixels })
    }
}

pub fn bitwise_and(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    a.zip_map(b, |x, y| x & y)
}

pub fn bitwise_or(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    a.zip_map(b, |x, y| x | y)
}

/// `max(a - b, 0)` per pixel.
pub fn saturating_subtract(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    a.zip_map(b, u8::saturating_sub)
}

/// Rounds and clamps a real intensity to 8 bits.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// `clamp(round(wa*a + wb*b), 0, 255)` per pixel.
pub fn weighted_add(a: &GrayImage, b: &GrayImage, wa: f64, wb: f64) -> Result<GrayImage> {
    for w in [wa, wb] {
        if w.is_nan() || w < 0.0 {
            return Err(Error::NegativeWeight(w));
        }
    }
    a.zip_map(b, |x, y| quantize(wa * f64::from(x) + wb * f64::from(y)))
}

pub fn invert(a: &GrayImage) -> GrayImage {
    GrayImage {
        width: a.width,
        height: a.height,
        pixels: a.pixels.iter().map(|&v| 255 - v).collect(),
    }
}

/// Maps an out-of-range index into `0..n` by reflect-101 (`-1 -> 1`, `n -> n-2`).
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for w in &mut k {
        *w /= sum;
    }
    Ok(k)
}

/// Separable Gaussian blur with reflect-101 borders. Both passes run in `f64`;
/// the result is quantized once.
pub fn gaussian_blur(a: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (a.width, a.height);

    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &a.pixels[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                let sx = reflect101(x as isize + t as isize - r, w);
                acc += k * f64::from(row[sx]);
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut pixels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                let sy = reflect101(y as isize + t as isize - r, h);
                acc += k * horiz[sy * w + x];
            }
            pixels[y * w + x] = quantize(acc);
        }
    }
    Ok(GrayImage { width: w, height: h, pixels })
}

/// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
pub fn crop(a: &GrayImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
    if w == 0 || h == 0 || x0 + w > a.width || y0 + h > a.height {
        return Err(Error::CropTooLarge { crop_w: w, crop_h: h, width: a.width, height: a.height });
    }
    let mut pixels = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        pixels.extend_from_slice(&a.pixels[y * a.width + x0..y * a.width + x0 + w]);
    }
    Ok(GrayImage { width: w, height: h, pixels })
}

/// Top-left corner of a centered `w`×`h` crop.
pub fn center_offset(a: &GrayImage, w: usize, h: usize) -> Result<(usize, usize)> {
    if w > a.width || h > a.height {
        return Err(Error::CropTooLarge { crop_w: w, crop_h: h, width: a.width, height: a.height });
    }
    Ok(((a.width - w) / 2, (a.height - h) / 2))
}

pub fn center_crop(a: &GrayImage, w: usize, h: usize) -> Result<GrayImage> {
    let (x0, y0) = center_offset(a, w, h)?;
    crop(a, x0, y0, w, h)
}

/// Crop at a uniformly random position. Draws x first, then y.
pub fn random_crop(a: &GrayImage, w: usize, h: usize, rng: &mut SplitMix64) -> Result<GrayImage> {
    if w > a.width || h > a.height {
        return Err(Error::CropTooLarge { crop_w: w, crop_h: h, width: a.width, height: a.height });
    }
    let x0 = rng.range_inclusive(0, a.width - w);
    let y0 = rng.range_inclusive(0, a.height - h);
    crop(a, x0, y0, w, h)
}

/// BT.601 luma, rounded.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    quantize(0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
}

pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_png(BufReader::new(file), path)
}

pub fn decode_png<R: std::io::BufRead + std::io::Seek>(reader: R, path: &Path) -> Result<GrayImage> {
    let decode_err = |e: png::DecodingError| Error::Decode { path: path.to_owned(), message: e.to_string() };
    let mut decoder = png::Decoder::new(reader);
    // Expands palettes and sub-byte depths to 8 bits; 16-bit stays 16-bit.
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth { path: path.to_owned(), depth: depth as u8 });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode { path: path.to_owned(), message: "image too large".into() })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Decode { path: path.to_owned(), message: "unexpanded palette".into() })
        }
    };
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        let line = &buf[y * info.line_size..y * info.line_size + w * channels];
        for px in line.chunks_exact(channels) {
            pixels.push(match channels {
                1 | 2 => px[0],
                _ => luma(px[0], px[1], px[2]),
            });
        }
    }
    GrayImage::new(w, h, pixels)
}

/// Encodes as an 8-bit grayscale PNG.
pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let enc_err = |e: png::EncodingError| Error::InvalidImage(e.to_string());
        let mut writer = encoder.write_header().map_err(enc_err)?;
        writer.write_image_data(&img.pixels).map_err(enc_err)?;
        writer.finish().map_err(enc_err)?;
    }
    Ok(out)
}

/// Encodes and writes atomically, creating parent directories.
pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    crate::fsio::atomic_write(path.as_ref(), &encode_png(img)?)
}
