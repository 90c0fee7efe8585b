//! Multi-layer synthetic (quasi-2.5D) carbon-nanotube forest imagery and
//! mechanical-property regression.
//!
//! The crate is organized as a pipeline of pure stages:
//!
//! 1. [`forestgen`] grows procedural 2D forest layers with per-layer buckling
//!    load and stiffness labels.
//! 2. [`blend`] stacks compatible layers with normalized Fibonacci weights and
//!    removes bright spots where strands overlap.
//! 3. [`labeling`] derives the equivalent stack labels.
//! 4. [`features`] turns images into fixed-size vectors (or imports external
//!    embeddings).
//! 5. [`forest`] trains random-forest regressors and classifiers.
//! 6. [`metrics`] scores predictions and writes reports.
//!
//! [`pipeline`] wires the stages to the filesystem with a single master seed.
//! All randomness flows through [`rng::SplitMix64`] streams, so every
//! artifact is reproducible from `(config, seed)` regardless of thread count.

pub mod blend;
pub mod error;
pub mod features;
pub mod forest;
pub mod forestgen;
pub mod fsio;
pub mod image;
pub mod labeling;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod rng;
mod svg;

pub use error::{Error, ErrorKind, Result};
pub use image::GrayImage;
