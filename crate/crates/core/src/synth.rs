//! Synthetic outlier generators and dataset augmentation.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{normalize_intensity, resize_bilinear, PressureGrid, GRID_PIXELS, GRID_SIZE};
use crate::rng::stream;
use crate::sample::{OutlierLabel, Sample, Side, Source};

/// Crop depth as a fraction of the foot's bounding-box height.
pub const CROP_FRACTION: (f64, f64) = (0.4, 0.6);
const CROP_RETRIES: usize = 5;
/// Width of the half-canvas each foot of a double capture must fit into.
pub const HALF_CANVAS: usize = 30;
pub const GAP_RANGE: (usize, usize) = (2, 6);
pub const VERTICAL_JITTER: i64 = 3;

fn require_inlier(s: &Sample) -> Result<()> {
    if s.label != OutlierLabel::Valid {
        return Err(Error::Precondition(format!(
            "sample {} has label {}, expected a valid inlier",
            s.id,
            s.label.value()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CropRegion {
    Forefoot,
    Heel,
}

/// Zeroes the top (forefoot) or bottom (heel) `rows` rows of the foot's
/// bounding box.
pub fn crop_rows(grid: &PressureGrid, region: CropRegion, rows: usize) -> Vec<f64> {
    let mut values: Vec<f64> = grid.as_slice().iter().map(|&v| f64::from(v)).collect();
    if let Some((top, bottom, _, _)) = grid.bounding_box() {
        let range = match region {
            CropRegion::Forefoot => top..(top + rows).min(bottom + 1),
            CropRegion::Heel => (bottom + 1).saturating_sub(rows).max(top)..bottom + 1,
        };
        for r in range {
            values[r * GRID_SIZE..(r + 1) * GRID_SIZE].fill(0.0);
        }
    }
    values
}

/// General acquisition error (label 1): forefoot or heel cropped away.
pub fn make_acquisition_error<R: Rng>(inlier: &Sample, rng: &mut R) -> Result<Sample> {
    require_inlier(inlier)?;
    let (top, bottom, _, _) = inlier
        .grid
        .bounding_box()
        .ok_or_else(|| Error::DegenerateInput(format!("sample {} is all zero", inlier.id)))?;
    let height = bottom - top + 1;
    let region = if rng.gen_bool(0.5) { CropRegion::Forefoot } else { CropRegion::Heel };
    for _ in 0..=CROP_RETRIES {
        let frac = rng.gen_range(CROP_FRACTION.0..=CROP_FRACTION.1);
        let rows = ((frac * height as f64).round() as usize).clamp(1, height);
        let cropped = crop_rows(&inlier.grid, region, rows);
        if let Ok(grid) = normalize_intensity(&cropped) {
            return Ok(Sample {
                id: format!("{}-acq", inlier.id),
                label: OutlierLabel::AcquisitionError,
                source: Source::Synthetic,
                grid,
                ..inlier.clone()
            });
        }
    }
    Err(Error::DegenerateInput(format!(
        "cropping sample {} left no signal after {CROP_RETRIES} retries",
        inlier.id
    )))
}

/// Foot content cropped to its bounding box.
struct Patch {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn extract_patch(grid: &PressureGrid) -> Option<Patch> {
    let (top, bottom, left, right) = grid.bounding_box()?;
    let (rows, cols) = (bottom - top + 1, right - left + 1);
    let mut values = Vec::with_capacity(rows * cols);
    for r in top..=bottom {
        values.extend((left..=right).map(|c| f64::from(grid.get(r, c))));
    }
    Some(Patch { rows, cols, values })
}

fn scale_patch(p: &Patch, factor: f64) -> Patch {
    if factor >= 1.0 {
        return Patch { rows: p.rows, cols: p.cols, values: p.values.clone() };
    }
    let rows = ((p.rows as f64 * factor).round() as usize).max(1);
    let cols = ((p.cols as f64 * factor).round() as usize).max(1);
    Patch { rows, cols, values: resize_bilinear(&p.values, p.rows, p.cols, rows, cols) }
}

fn paste(p: &Patch, top: usize, left: usize) -> Vec<f64> {
    let mut out = vec![0.0; GRID_PIXELS];
    for r in 0..p.rows {
        let dst = (top + r) * GRID_SIZE + left;
        out[dst..dst + p.cols].copy_from_slice(&p.values[r * p.cols..(r + 1) * p.cols]);
    }
    out
}

/// Placement drawn for a double capture.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairLayout {
    gap: usize,
    jitter_left: i64,
    jitter_right: i64,
}

/// The two placed feet before they are combined, each on its own canvas.
pub(crate) fn double_capture_layers(
    left: &PressureGrid,
    right: &PressureGrid,
    layout: PairLayout,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let degenerate = || Error::DegenerateInput("double capture source is all zero".into());
    let pl = extract_patch(left).ok_or_else(degenerate)?;
    let pr = extract_patch(right).ok_or_else(degenerate)?;
    let fit = |p: &Patch| (HALF_CANVAS as f64 / p.cols as f64).min(GRID_SIZE as f64 / p.rows as f64);
    let mut fl = fit(&pl).min(1.0);
    let mut fr = fit(&pr).min(1.0);
    let avail = (GRID_SIZE - layout.gap) as f64;
    let total = pl.cols as f64 * fl + pr.cols as f64 * fr;
    if total > avail {
        let shrink = avail / total;
        fl *= shrink;
        fr *= shrink;
    }
    let mut sl = scale_patch(&pl, fl);
    let mut sr = scale_patch(&pr, fr);
    // rounding can still overflow the canvas by a pixel
    while sl.cols + sr.cols + layout.gap > GRID_SIZE {
        if sl.cols >= sr.cols {
            sl = scale_patch(&pl, (sl.cols - 1) as f64 / pl.cols as f64);
        } else {
            sr = scale_patch(&pr, (sr.cols - 1) as f64 / pr.cols as f64);
        }
    }
    let x0 = (GRID_SIZE - (sl.cols + layout.gap + sr.cols)) / 2;
    let place_row = |p: &Patch, jitter: i64| -> usize {
        let free = (GRID_SIZE - p.rows) as i64;
        (free / 2 + jitter).clamp(0, free) as usize
    };
    Ok((
        paste(&sl, place_row(&sl, layout.jitter_left), x0),
        paste(&sr, place_row(&sr, layout.jitter_right), x0 + sl.cols + layout.gap),
    ))
}

/// Double foot capture (label 2): a left and a right foot of different
/// subjects side by side on one canvas, with a random side label.
pub fn make_double_capture<R: Rng>(left: &Sample, right: &Sample, rng: &mut R) -> Result<Sample> {
    require_inlier(left)?;
    require_inlier(right)?;
    if left.side != Side::Left || right.side != Side::Right {
        return Err(Error::Precondition(
            "double capture needs a left-side and a right-side sample".into(),
        ));
    }
    if left.subject_id == right.subject_id {
        return Err(Error::Precondition(format!(
            "double capture needs two subjects, both samples belong to {}",
            left.subject_id
        )));
    }
    let layout = PairLayout {
        gap: rng.gen_range(GAP_RANGE.0..=GAP_RANGE.1),
        jitter_left: rng.gen_range(-VERTICAL_JITTER..=VERTICAL_JITTER),
        jitter_right: rng.gen_range(-VERTICAL_JITTER..=VERTICAL_JITTER),
    };
    let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
    let (a, b) = double_capture_layers(&left.grid, &right.grid, layout)?;
    let combined: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    Ok(Sample {
        id: format!("{}+{}", left.id, right.id),
        subject_id: format!("{}+{}", left.subject_id, right.subject_id),
        side,
        condition: left.condition,
        label: OutlierLabel::DoubleCapture,
        source: Source::Synthetic,
        grid: normalize_intensity(&combined)?,
    })
}

/// Inverted orientation (label 3): exact 180° index flip.
pub fn make_inverted(inlier: &Sample) -> Result<Sample> {
    require_inlier(inlier)?;
    Ok(Sample {
        id: format!("{}-inv", inlier.id),
        label: OutlierLabel::InvertedOrientation,
        source: Source::Synthetic,
        grid: inlier.grid.rotate_180(),
        ..inlier.clone()
    })
}

/// Incorrect side annotation (label 4): same grid, side toggled.
pub fn make_side_flip(inlier: &Sample) -> Result<Sample> {
    require_inlier(inlier)?;
    Ok(Sample {
        id: format!("{}-flip", inlier.id),
        side: inlier.side.opposite(),
        label: OutlierLabel::IncorrectSide,
        source: Source::Synthetic,
        ..inlier.clone()
    })
}

/// Single label for a sample matching several categories.
///
/// Incorrect side annotation only survives on its own; otherwise the
/// priority is acquisition error > double capture > inverted orientation.
pub fn resolve_label(labels: &[OutlierLabel]) -> Result<OutlierLabel> {
    if labels.is_empty() {
        return Err(Error::Precondition("resolve_label needs at least one label".into()));
    }
    // Priority coincides with increasing label value among outliers.
    Ok(labels
        .iter()
        .copied()
        .filter(|l| l.is_outlier())
        .min()
        .unwrap_or(OutlierLabel::Valid))
}

fn synthesize_one(
    label: OutlierLabel,
    inliers: &[&Sample],
    lefts: &[&Sample],
    rights: &[&Sample],
    seed: u64,
    index: usize,
) -> Result<Sample> {
    const DRAWS: usize = 100;
    let mut rng = stream(seed, "synth", &[u64::from(label.value()), index as u64]);
    let mut last_err = None;
    for _ in 0..DRAWS {
        let out = match label {
            OutlierLabel::AcquisitionError => {
                make_acquisition_error(inliers[rng.gen_range(0..inliers.len())], &mut rng)
            }
            OutlierLabel::InvertedOrientation => make_inverted(inliers[rng.gen_range(0..inliers.len())]),
            OutlierLabel::IncorrectSide => make_side_flip(inliers[rng.gen_range(0..inliers.len())]),
            OutlierLabel::DoubleCapture => {
                if lefts.is_empty() || rights.is_empty() {
                    return Err(Error::Precondition(
                        "double capture needs both left and right inliers".into(),
                    ));
                }
                let l = lefts[rng.gen_range(0..lefts.len())];
                let r = rights[rng.gen_range(0..rights.len())];
                if l.subject_id == r.subject_id {
                    continue;
                }
                make_double_capture(l, r, &mut rng)
            }
            OutlierLabel::Valid => unreachable!("valid samples are never synthesized"),
        };
        match out {
            Ok(mut s) => {
                s.id = format!("syn{}-{index:04}", label.value());
                return Ok(s);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::Precondition(format!(
            "could not draw sources for label {} after {DRAWS} attempts",
            label.value()
        ))
    }))
}

/// Number of synthetic samples per outlier class needed to reach `target`.
pub fn synthetic_deficit(samples: &[Sample], target: usize) -> [usize; 4] {
    let mut out = [0; 4];
    for (slot, label) in out.iter_mut().zip(OutlierLabel::OUTLIERS) {
        let have = samples.iter().filter(|s| s.label == label).count();
        *slot = target.saturating_sub(have);
    }
    out
}

/// Tops every outlier class up to `target_per_class` with synthetic samples.
///
/// Existing samples are returned unchanged and first; synthetic samples get
/// ids `syn<label>-<index>` and source `synthetic`. Sources are drawn
/// uniformly with replacement from the inliers.
pub fn augment_dataset(samples: &[Sample], target_per_class: usize, seed: u64) -> Result<Vec<Sample>> {
    let inliers: Vec<&Sample> = samples.iter().filter(|s| s.label == OutlierLabel::Valid).collect();
    if inliers.is_empty() {
        return Err(Error::Precondition("augmentation needs at least one inlier".into()));
    }
    let lefts: Vec<&Sample> = inliers.iter().copied().filter(|s| s.side == Side::Left).collect();
    let rights: Vec<&Sample> = inliers.iter().copied().filter(|s| s.side == Side::Right).collect();
    let jobs: Vec<(OutlierLabel, usize)> = OutlierLabel::OUTLIERS
        .iter()
        .zip(synthetic_deficit(samples, target_per_class))
        .flat_map(|(&label, need)| (0..need).map(move |j| (label, j)))
        .collect();
    let synthetic = jobs
        .par_iter()
        .map(|&(label, j)| synthesize_one(label, &inliers, &lefts, &rights, seed, j))
        .collect::<Result<Vec<_>>>()?;

    let mut out = samples.to_vec();
    out.extend(synthetic);
    let mut ids = HashSet::new();
    if let Some(dup) = out.iter().find(|s| !ids.insert(s.id.as_str())) {
        return Err(Error::Validation(format!("augmentation produced duplicate id {}", dup.id)));
    }
    Ok(out)
}
