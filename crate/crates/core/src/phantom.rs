//! Parametric phantom generator of valid plantar-pressure maps.
//!
//! A right foot is rasterized from anisotropic Gaussian blobs placed in foot
//! coordinates (heel, lateral midfoot band, metatarsal heads, hallux and
//! lesser toes). Left feet are the column mirror of a right foot drawn with
//! the left side's asymmetry perturbation. Every jittered quantity comes from
//! its own counter-based key so generation order does not matter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{normalize_intensity, PressureGrid, GRID_PIXELS, GRID_SIZE};
use crate::rng::{derive_key, signed_unit};
use crate::sample::{Condition, OutlierLabel, Sample, Side, Source};

/// Values below this fraction of the peak are treated as no contact.
pub const CONTACT_FLOOR: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub seed: u64,
    pub n_subjects: usize,
    /// Relative jitter of foot length and width.
    pub scale_jitter: f64,
    /// Foot rotation jitter in degrees.
    pub angle_jitter: f64,
    /// Relative jitter of blob amplitudes.
    pub intensity_jitter: f64,
    /// Jitter of the foot position in pixels.
    pub shift_jitter: f64,
    /// Strength of the per-side perturbation; 0 makes L the exact mirror of R.
    pub asymmetry: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            seed: 0,
            n_subjects: 1,
            scale_jitter: 0.1,
            angle_jitter: 5.0,
            intensity_jitter: 0.15,
            shift_jitter: 2.0,
            asymmetry: 0.1,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let jitters = [
            self.scale_jitter,
            self.angle_jitter,
            self.intensity_jitter,
            self.shift_jitter,
            self.asymmetry,
        ];
        if jitters.iter().any(|j| !(j.is_finite() && *j >= 0.0)) {
            return Err(Error::Validation("phantom jitters must be finite and >= 0".into()));
        }
        if self.n_subjects == 0 {
            return Err(Error::Validation("n_subjects must be >= 1".into()));
        }
        if self.scale_jitter >= 0.5 {
            return Err(Error::Validation("scale_jitter must be < 0.5".into()));
        }
        Ok(())
    }
}

/// One blob in foot coordinates: `v` runs heel (0) to toe tip (1), `u` runs
/// medial (-1) to lateral (+1) across the forefoot half-width. Sigmas in pixels
/// at unit scale.
struct Blob {
    v: f64,
    u: f64,
    sigma_long: f64,
    sigma_lat: f64,
    amp: f64,
}

const fn blob(v: f64, u: f64, sigma_long: f64, sigma_lat: f64, amp: f64) -> Blob {
    Blob { v, u, sigma_long, sigma_lat, amp }
}

const BLOBS: [Blob; 11] = [
    // heel
    blob(0.13, 0.02, 4.0, 3.6, 0.85),
    // lateral midfoot band
    blob(0.40, 0.45, 7.5, 2.6, 0.24),
    // metatarsal heads, medial to lateral
    blob(0.71, -0.62, 3.0, 3.0, 0.95),
    blob(0.72, -0.12, 3.0, 3.2, 1.00),
    blob(0.70, 0.36, 3.0, 3.0, 0.85),
    blob(0.67, 0.78, 2.8, 2.6, 0.65),
    // hallux
    blob(0.92, -0.62, 2.8, 2.6, 0.80),
    // lesser toes
    blob(0.89, -0.10, 1.9, 1.7, 0.45),
    blob(0.87, 0.22, 1.8, 1.6, 0.40),
    blob(0.85, 0.50, 1.8, 1.6, 0.36),
    blob(0.82, 0.76, 1.7, 1.5, 0.32),
];

const FOOT_LENGTH: f64 = 40.0;
const FOOT_WIDTH: f64 = 18.0;

// Field indices of the jittered quantities.
const F_SCALE: u64 = 0;
const F_WIDTH: u64 = 1;
const F_ANGLE: u64 = 2;
const F_ROW: u64 = 3;
const F_COL: u64 = 4;
const F_BLOB: u64 = 16;

fn field(cfg: &PhantomConfig, subject_seed: u64, side: Side, index: u64) -> f64 {
    let base = signed_unit(subject_seed, "phantom", &[index]);
    let wobble = signed_unit(subject_seed, "phantom-side", &[side.index() as u64, index]);
    (base + cfg.asymmetry * wobble).clamp(-1.0, 1.0)
}

/// Rasterizes a right foot; left feet are mirrored afterwards.
fn rasterize(cfg: &PhantomConfig, subject_seed: u64, side: Side) -> Vec<f64> {
    let f = |i| field(cfg, subject_seed, side, i);
    let scale = 1.0 + cfg.scale_jitter * f(F_SCALE);
    let length = FOOT_LENGTH * scale;
    let width = FOOT_WIDTH * scale * (1.0 + 0.05 * f(F_WIDTH));
    let angle = (cfg.angle_jitter * f(F_ANGLE)).to_radians();
    let center_row = 31.5 + cfg.shift_jitter * f(F_ROW);
    let center_col = 31.5 + cfg.shift_jitter * f(F_COL);
    let (sin, cos) = angle.sin_cos();

    struct Placed {
        row: f64,
        col: f64,
        inv_2var_long: f64,
        inv_2var_lat: f64,
        amp: f64,
    }
    let placed: Vec<Placed> = BLOBS
        .iter()
        .enumerate()
        .map(|(b, blob)| {
            let k = F_BLOB + 4 * b as u64;
            let v = blob.v + 0.015 * f(k);
            let u = blob.u + 0.06 * f(k + 1);
            let amp = blob.amp * (1.0 + cfg.intensity_jitter * f(k + 2));
            let size = scale * (1.0 + 0.08 * f(k + 3));
            let sl = blob.sigma_long * size;
            let st = blob.sigma_lat * size;
            Placed {
                row: (0.46 - v) * length,
                col: u * width / 2.0,
                inv_2var_long: 1.0 / (2.0 * sl * sl),
                inv_2var_lat: 1.0 / (2.0 * st * st),
                amp,
            }
        })
        .collect();

    let mut out = vec![0.0; GRID_PIXELS];
    for (idx, o) in out.iter_mut().enumerate() {
        let dy = (idx / GRID_SIZE) as f64 - center_row;
        let dx = (idx % GRID_SIZE) as f64 - center_col;
        // image offset -> foot frame
        let fy = cos * dy - sin * dx;
        let fx = sin * dy + cos * dx;
        *o = placed
            .iter()
            .map(|p| {
                let a = fy - p.row;
                let c = fx - p.col;
                p.amp * (-(a * a * p.inv_2var_long + c * c * p.inv_2var_lat)).exp()
            })
            .sum();
    }
    out
}

fn finish(field: Vec<f64>) -> PressureGrid {
    let max = field.iter().copied().fold(0.0, f64::max);
    let floored: Vec<f64> = field
        .into_iter()
        .map(|v| if v < CONTACT_FLOOR * max { 0.0 } else { v })
        .collect();
    normalize_intensity(&floored).expect("phantom field has a positive peak")
}

/// Derives the per-subject seed used by [`generate_cohort`].
pub fn subject_seed(master_seed: u64, subject_index: u64) -> u64 {
    derive_key(master_seed, "phantom-subject", &[subject_index])
}

/// Phantom grid for one subject and side.
pub fn phantom_grid(cfg: &PhantomConfig, subject_seed: u64, side: Side) -> PressureGrid {
    let right = finish(rasterize(cfg, subject_seed, side));
    match side {
        Side::Right => right,
        Side::Left => right.mirror_columns(),
    }
}

/// Valid (label 0) phantom sample with id `<subject_id>-<side>`.
pub fn generate_phantom(
    cfg: &PhantomConfig,
    subject_id: &str,
    subject_seed: u64,
    side: Side,
) -> Sample {
    Sample {
        id: format!("{subject_id}-{side}"),
        subject_id: subject_id.to_string(),
        side,
        condition: Condition::Static,
        label: OutlierLabel::Valid,
        source: Source::Phantom,
        grid: phantom_grid(cfg, subject_seed, side),
    }
}

/// Left and right phantoms for `n_subjects` subjects named `P0000`, `P0001`, ...
pub fn generate_cohort(cfg: &PhantomConfig) -> Result<Vec<Sample>> {
    generate_cohort_range(cfg, 0, cfg.n_subjects)
}

/// Like [`generate_cohort`] for subject indices `start..start + count`.
pub fn generate_cohort_range(cfg: &PhantomConfig, start: usize, count: usize) -> Result<Vec<Sample>> {
    cfg.validate()?;
    use rayon::prelude::*;
    let per_subject: Vec<[Sample; 2]> = (start..start + count)
        .into_par_iter()
        .map(|i| {
            let seed = subject_seed(cfg.seed, i as u64);
            let sid = format!("P{i:04}");
            [
                generate_phantom(cfg, &sid, seed, Side::Left),
                generate_phantom(cfg, &sid, seed, Side::Right),
            ]
        })
        .collect();
    Ok(per_subject.into_iter().flatten().collect())
}

/// Row centroids `(forefoot, heel)` of the two foot segments.
///
/// The foot's bounding box is split at the lightest row in its middle
/// 30–70 % band (the arch); the heavier segment is taken as the forefoot.
pub fn forefoot_heel_centroids(grid: &PressureGrid) -> Option<(f64, f64)> {
    let (top, bottom, _, _) = grid.bounding_box()?;
    let mass: Vec<f64> = (0..GRID_SIZE)
        .map(|r| (0..GRID_SIZE).map(|c| f64::from(grid.get(r, c))).sum())
        .collect();
    let h = bottom - top + 1;
    if h < 4 {
        return None;
    }
    let lo = top + (3 * h) / 10;
    let hi = (top + (7 * h) / 10).max(lo + 1);
    let split = (lo..hi)
        .min_by(|&a, &b| mass[a].total_cmp(&mass[b]).then(a.cmp(&b)))?;
    let centroid = |rows: std::ops::Range<usize>| {
        let m: f64 = rows.clone().map(|r| mass[r]).sum();
        let c: f64 = rows.map(|r| r as f64 * mass[r]).sum();
        (m, c / m)
    };
    let (m_top, c_top) = centroid(top..split);
    let (m_bot, c_bot) = centroid(split..bottom + 1);
    if !(m_top > 0.0 && m_bot > 0.0) {
        return None;
    }
    Some(if m_top >= m_bot { (c_top, c_bot) } else { (c_bot, c_top) })
}
