//! The 64×64 pressure grid, intensity normalization and resampling of raw
//! sensor matrices onto the standard grid.

use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 64;
pub const GRID_PIXELS: usize = GRID_SIZE * GRID_SIZE;

/// Normalized 64×64 plantar-pressure map, row-major.
///
/// Row 0 is the top of the image (forefoot in standard orientation) and
/// column 0 the left edge. Values are finite and lie in `[0, 1]`. A grid
/// with no positive value is representable (warps can push all content out
/// of frame) but fails [`PressureGrid::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct PressureGrid {
    values: Vec<f32>,
}

impl PressureGrid {
    pub fn zeros() -> Self {
        PressureGrid {
            values: vec![0.0; GRID_PIXELS],
        }
    }

    /// Wraps already normalized values, checking shape and range.
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != GRID_PIXELS {
            return Err(Error::DataFormat(format!(
                "expected {GRID_PIXELS} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DataFormat(format!("non-finite grid value {v}")));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::DataFormat(format!("grid value {v} outside [0, 1]")));
        }
        Ok(PressureGrid { values })
    }

    /// Builds a grid from `f64` values, clipping into `[0, 1]`.
    pub(crate) fn from_f64_clipped(values: &[f64]) -> Self {
        debug_assert_eq!(values.len(), GRID_PIXELS);
        PressureGrid {
            values: values.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect(),
        }
    }

    /// Rejects degenerate (all-zero) grids.
    pub fn validate(&self) -> Result<()> {
        if self.values.iter().all(|&v| v <= 0.0) {
            return Err(Error::DegenerateInput("grid has no positive value".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * GRID_SIZE + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        assert!(value.is_finite() && (0.0..=1.0).contains(&value));
        self.values[row * GRID_SIZE + col] = value;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v)).sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Rescales so the maximum becomes exactly 1.
    pub fn renormalized(&self) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f64::from(v)).collect();
        normalize_intensity(&values)
    }

    /// Column mirror: `out[i][j] = in[i][63 - j]`.
    pub fn mirror_columns(&self) -> Self {
        let mut values = vec![0.0; GRID_PIXELS];
        for (dst, src) in values
            .chunks_exact_mut(GRID_SIZE)
            .zip(self.values.chunks_exact(GRID_SIZE))
        {
            for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *s;
            }
        }
        PressureGrid { values }
    }

    /// Exact 180° index flip: `out[i][j] = in[63 - i][63 - j]`.
    pub fn rotate_180(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        PressureGrid { values }
    }

    /// Mass-weighted centroid as `(row, col)`, `None` for an all-zero grid.
    pub fn center_of_mass(&self) -> Option<(f64, f64)> {
        let (mut m, mut r, mut c) = (0.0, 0.0, 0.0);
        for (idx, &v) in self.values.iter().enumerate() {
            let v = f64::from(v);
            m += v;
            r += v * (idx / GRID_SIZE) as f64;
            c += v * (idx % GRID_SIZE) as f64;
        }
        (m > 0.0).then(|| (r / m, c / m))
    }

    /// Inclusive bounding box `(top, bottom, left, right)` of positive pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                let (r, c) = (idx / GRID_SIZE, idx % GRID_SIZE);
                bb = Some(match bb {
                    None => (r, r, c, c),
                    Some((t, b, l, rt)) => (t.min(r), b.max(r), l.min(c), rt.max(c)),
                });
            }
        }
        bb
    }
}

/// Divides a non-negative 64×64 field by its maximum.
pub fn normalize_intensity(values: &[f64]) -> Result<PressureGrid> {
    if values.len() != GRID_PIXELS {
        return Err(Error::DataFormat(format!(
            "expected {GRID_PIXELS} values, got {}",
            values.len()
        )));
    }
    check_non_negative(values)?;
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateInput("all-zero intensity field".into()));
    }
    Ok(PressureGrid {
        values: values.iter().map(|&v| (v / max) as f32).collect(),
    })
}

fn check_non_negative(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::DataFormat(format!("non-finite intensity {v}")));
    }
    if let Some(v) = values.iter().find(|&&v| v < 0.0) {
        return Err(Error::DataFormat(format!("negative intensity {v}")));
    }
    Ok(())
}

/// Raw sensor matrix, row-major, before harmonization.
#[derive(Clone, Debug)]
pub struct RawMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl RawMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::DataFormat(format!(
                "raw map {rows}x{cols} does not match {} values",
                values.len()
            )));
        }
        Ok(RawMap { rows, cols, values })
    }
}

/// How bilinear sampling treats coordinates outside the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Border {
    Zero,
    Clamp,
}

/// Bilinear sample at `(y, x)` in pixel-center coordinates.
///
/// Integral coordinates return the stored value exactly.
#[inline]
pub(crate) fn bilinear<T: Copy + Into<f64>>(
    values: &[T],
    rows: usize,
    cols: usize,
    y: f64,
    x: f64,
    border: Border,
) -> f64 {
    let (y, x) = match border {
        Border::Zero => (y, x),
        Border::Clamp => (y.clamp(0.0, (rows - 1) as f64), x.clamp(0.0, (cols - 1) as f64)),
    };
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (r0, c0) = (y0 as isize, x0 as isize);
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            0.0
        } else {
            values[r as usize * cols + c as usize].into()
        }
    };
    if fy == 0.0 && fx == 0.0 {
        return at(r0, c0);
    }
    if fy == 0.0 {
        return at(r0, c0) * (1.0 - fx) + at(r0, c0 + 1) * fx;
    }
    if fx == 0.0 {
        return at(r0, c0) * (1.0 - fy) + at(r0 + 1, c0) * fy;
    }
    let top = at(r0, c0) * (1.0 - fx) + at(r0, c0 + 1) * fx;
    let bottom = at(r0 + 1, c0) * (1.0 - fx) + at(r0 + 1, c0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples `src` (rows×cols) onto an `out_rows`×`out_cols` lattice with
/// aligned pixel centers, edges clamped.
pub(crate) fn resize_bilinear<T: Copy + Into<f64>>(
    src: &[T],
    rows: usize,
    cols: usize,
    out_rows: usize,
    out_cols: usize,
) -> Vec<f64> {
    let sy = rows as f64 / out_rows as f64;
    let sx = cols as f64 / out_cols as f64;
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for i in 0..out_rows {
        let y = (i as f64 + 0.5) * sy - 0.5;
        for j in 0..out_cols {
            let x = (j as f64 + 0.5) * sx - 0.5;
            out.push(bilinear(src, rows, cols, y, x, Border::Clamp));
        }
    }
    out
}

/// Harmonizes a raw sensor matrix onto the standard grid.
///
/// The physical extent `rows·pitch_row × cols·pitch_col` keeps its aspect
/// ratio, the longer side spans 64 pixels and the shorter axis is
/// zero-padded symmetrically (an odd leftover goes to the bottom/right).
pub fn resample_to_grid(raw: &RawMap, pitch_row: f64, pitch_col: f64) -> Result<PressureGrid> {
    if !(pitch_row > 0.0 && pitch_col > 0.0 && pitch_row.is_finite() && pitch_col.is_finite()) {
        return Err(Error::Precondition(format!(
            "sensor pitches must be positive, got ({pitch_row}, {pitch_col})"
        )));
    }
    check_non_negative(&raw.values)?;
    if raw.values.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("all-zero raw map".into()));
    }
    let (content_rows, content_cols) = content_shape(raw.rows, raw.cols, pitch_row, pitch_col);
    let content = resize_bilinear(&raw.values, raw.rows, raw.cols, content_rows, content_cols);

    let top = (GRID_SIZE - content_rows) / 2;
    let left = (GRID_SIZE - content_cols) / 2;
    let mut field = vec![0.0; GRID_PIXELS];
    for i in 0..content_rows {
        let dst = (top + i) * GRID_SIZE + left;
        field[dst..dst + content_cols]
            .copy_from_slice(&content[i * content_cols..(i + 1) * content_cols]);
    }
    normalize_intensity(&field)
}

/// Pixel extent of the resampled content; the longer physical side gets 64.
pub(crate) fn content_shape(rows: usize, cols: usize, pitch_row: f64, pitch_col: f64) -> (usize, usize) {
    let height = rows as f64 * pitch_row;
    let width = cols as f64 * pitch_col;
    let scale = GRID_SIZE as f64 / height.max(width);
    let r = ((height * scale).round() as usize).clamp(1, GRID_SIZE);
    let c = ((width * scale).round() as usize).clamp(1, GRID_SIZE);
    (r, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> RawMap {
        let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        RawMap::new(rows, cols, values).unwrap()
    }

    #[test]
    fn normalize_constant_grid() {
        let g = normalize_intensity(&vec![5.0; GRID_PIXELS]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn normalize_single_pixel() {
        let mut v = vec![0.0; GRID_PIXELS];
        v[100] = 0.25;
        let g = normalize_intensity(&v).unwrap();
        assert_eq!(g.as_slice()[100], 1.0);
        assert_eq!(g.nonzero_count(), 1);
    }

    #[test]
    fn normalize_is_idempotent() {
        let v: Vec<f64> = (0..GRID_PIXELS).map(|i| ((i * 37) % 101) as f64).collect();
        let once = normalize_intensity(&v).unwrap();
        let twice = once.renormalized().unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.max(), 1.0);
    }

    #[test]
    fn normalize_rejects_zero_and_nan() {
        assert!(matches!(
            normalize_intensity(&vec![0.0; GRID_PIXELS]),
            Err(Error::DegenerateInput(_))
        ));
        let mut v = vec![1.0; GRID_PIXELS];
        v[3] = f64::NAN;
        assert!(matches!(normalize_intensity(&v), Err(Error::DataFormat(_))));
    }

    #[test]
    fn resample_identity_geometry() {
        let r = raw(64, 64, |i, j| ((i * 64 + j) % 7) as f64 * 0.5);
        let g = resample_to_grid(&r, 1.0, 1.0).unwrap();
        for (k, &v) in g.as_slice().iter().enumerate() {
            assert_eq!(v, (r.values[k] / 3.0) as f32);
        }
    }

    #[test]
    fn resample_upscales_32_to_64_without_padding() {
        let r = raw(32, 32, |i, j| 1.0 + (i + j) as f64);
        let g = resample_to_grid(&r, 2.0, 2.0).unwrap();
        assert_eq!(g.nonzero_count(), GRID_PIXELS);
        // output pixel (2i, 2j) samples the source at (i - 0.25, j - 0.25)
        let expect = (1.0 + (10.0 - 0.25) + (20.0 - 0.25)) / (1.0 + 31.0 + 31.0);
        assert!((f64::from(g.get(20, 40)) - expect).abs() < 1e-6);
    }

    #[test]
    fn resample_tall_map_pads_columns_evenly() {
        // 80x40 with square pitch scales by 0.8 to 64x32, leaving 32 columns of padding.
        let r = raw(80, 40, |_, _| 2.0);
        assert_eq!(content_shape(80, 40, 1.0, 1.0), (64, 32));
        let g = resample_to_grid(&r, 1.0, 1.0).unwrap();
        for i in 0..GRID_SIZE {
            for j in 0..GRID_SIZE {
                let inside = (16..48).contains(&j);
                assert_eq!(g.get(i, j), if inside { 1.0 } else { 0.0 }, "({i},{j})");
            }
        }
    }

    #[test]
    fn resample_odd_padding_goes_bottom_right() {
        // 64 x 33 content leaves 31 columns: 15 left, 16 right
        let r = raw(64, 33, |_, _| 1.0);
        let g = resample_to_grid(&r, 1.0, 1.0).unwrap();
        assert_eq!(g.get(10, 14), 0.0);
        assert_eq!(g.get(10, 15), 1.0);
        assert_eq!(g.get(10, 47), 1.0);
        assert_eq!(g.get(10, 48), 0.0);
    }

    #[test]
    fn resample_respects_physical_pitch() {
        // 40x40 sensors with rows twice as far apart: physically 80 x 40
        assert_eq!(content_shape(40, 40, 2.0, 1.0), (64, 32));
    }

    #[test]
    fn resample_errors() {
        let zero = raw(4, 4, |_, _| 0.0);
        assert!(matches!(resample_to_grid(&zero, 1.0, 1.0), Err(Error::DegenerateInput(_))));
        let bad = raw(4, 4, |i, _| if i == 2 { f64::INFINITY } else { 1.0 });
        assert!(matches!(resample_to_grid(&bad, 1.0, 1.0), Err(Error::DataFormat(_))));
    }

    #[test]
    fn flips() {
        let mut g = PressureGrid::zeros();
        g.set(0, 0, 0.7);
        g.set(5, 9, 1.0);
        let r = g.rotate_180();
        assert_eq!(r.get(63, 63), 0.7);
        assert_eq!(r.get(58, 54), 1.0);
        assert_eq!(r.rotate_180(), g);
        let m = g.mirror_columns();
        assert_eq!(m.get(0, 63), 0.7);
        assert_eq!(m.mirror_columns(), g);
    }
}
