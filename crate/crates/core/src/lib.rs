//! Quality control for plantar-pressure maps.
//!
//! The crate flags technical errors and procedural inconsistencies in 64×64
//! peak-pressure grids. The main detector registers every grid to a per-side
//! template and compares it pixel by pixel against a normative cohort with a
//! rank test, then keeps only clusters that survive a permutation
//! family-wise error correction.
//!
//! Module map:
//!
//! * [`grid`], [`sample`], [`io`]: data types, resampling and the on-disk
//!   formats (raw little-endian `f32` grids and a JSON Lines manifest).
//! * [`phantom`]: seeded generator of plausible valid pressure maps.
//! * [`synth`]: the four synthetic outlier classes and dataset augmentation.
//! * [`registration`]: bounded affine registration and template building.
//! * [`spm`]: p-value maps, clusters, permutation null and the detector.
//! * [`evaluation`]: grouped stratified folds, nested CV and metrics.
//! * [`render`]: PNG figures for the detector and attribution overlays.

pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod phantom;
pub mod registration;
pub mod render;
pub mod rng;
pub mod sample;
pub mod spm;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{PressureGrid, GRID_PIXELS, GRID_SIZE};
pub use sample::{Condition, OutlierLabel, Sample, Side, Source};
