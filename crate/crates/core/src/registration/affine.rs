use serde::{Deserialize, Serialize};

use crate::grid::{bilinear, Border, PressureGrid, GRID_PIXELS, GRID_SIZE};

/// Rotation and zoom act about the grid center.
pub const CENTER: f64 = (GRID_SIZE as f64 - 1.0) / 2.0;

/// Similarity transform applied as zoom, then rotation, then shift, all
/// about the grid center. With `x` = column and `y` = row, a source pixel
/// `p` lands at `R(angle) · zoom · (p - c) + c + (shift_x, shift_y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub angle: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub zoom: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamBounds {
    pub max_angle: f64,
    pub max_shift: f64,
    pub zoom: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            max_angle: std::f64::consts::FRAC_PI_6,
            max_shift: 16.0,
            zoom: (0.7, 1.3),
        }
    }
}

impl ParamBounds {
    pub fn lower(&self) -> [f64; 4] {
        [-self.max_angle, -self.max_shift, -self.max_shift, self.zoom.0]
    }

    pub fn upper(&self) -> [f64; 4] {
        [self.max_angle, self.max_shift, self.max_shift, self.zoom.1]
    }

    pub fn contains(&self, p: &AffineParams) -> bool {
        let v = p.to_array();
        v.iter()
            .zip(self.lower().iter().zip(self.upper()))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= hi)
    }

    pub fn clamp(&self, p: AffineParams) -> AffineParams {
        let lo = self.lower();
        let hi = self.upper();
        let v = p.to_array();
        AffineParams::from_array(std::array::from_fn(|i| v[i].clamp(lo[i], hi[i])))
    }
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        angle: 0.0,
        shift_x: 0.0,
        shift_y: 0.0,
        zoom: 1.0,
    };

    pub fn new(angle: f64, shift_x: f64, shift_y: f64, zoom: f64) -> Self {
        AffineParams { angle, shift_x, shift_y, zoom }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.angle, self.shift_x, self.shift_y, self.zoom]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        AffineParams::new(v[0], v[1], v[2], v[3])
    }

    /// Parameters of the inverse map in the same zoom→rotate→shift form.
    pub fn inverse(self) -> Self {
        let (s, c) = self.angle.sin_cos();
        // R(-a) t / z
        let tx = (c * self.shift_x + s * self.shift_y) / self.zoom;
        let ty = (-s * self.shift_x + c * self.shift_y) / self.zoom;
        AffineParams::new(-self.angle, -tx, -ty, 1.0 / self.zoom)
    }

    /// `(sin, cos)` snapped onto exact lattice values when within rounding
    /// noise, so quarter turns move pixel centers onto pixel centers.
    fn rotation(self) -> (f64, f64) {
        let (mut s, mut c) = self.angle.sin_cos();
        const EPS: f64 = 1e-12;
        if s.abs() < EPS {
            s = 0.0;
            c = c.signum();
        } else if c.abs() < EPS {
            c = 0.0;
            s = s.signum();
        }
        (s, c)
    }

    /// Inverse mapping of an output pixel `(row, col)` to source `(y, x)`.
    #[inline]
    pub fn source_of(self, row: f64, col: f64) -> (f64, f64) {
        let (s, c) = self.rotation();
        self.inverse_map(s, c, row, col)
    }

    #[inline]
    fn inverse_map(self, s: f64, c: f64, row: f64, col: f64) -> (f64, f64) {
        let dx = col - CENTER - self.shift_x;
        let dy = row - CENTER - self.shift_y;
        // R(-a) (d) / z
        let x = (c * dx + s * dy) / self.zoom + CENTER;
        let y = (-s * dx + c * dy) / self.zoom + CENTER;
        (y, x)
    }
}

/// Warps `src` into `out` by inverse mapping with bilinear sampling;
/// samples outside the source are 0. Works on any square-64 slice type.
pub(crate) fn warp_into<T: Copy + Into<f64>>(src: &[T], params: AffineParams, out: &mut [f64]) {
    debug_assert_eq!(src.len(), GRID_PIXELS);
    debug_assert_eq!(out.len(), GRID_PIXELS);
    let (s, c) = params.rotation();
    for (idx, o) in out.iter_mut().enumerate() {
        let (y, x) = params.inverse_map(s, c, (idx / GRID_SIZE) as f64, (idx % GRID_SIZE) as f64);
        *o = bilinear(src, GRID_SIZE, GRID_SIZE, y, x, Border::Zero);
    }
}

/// Applies `params` to a grid; output clipped to `[0, 1]`.
pub fn apply_affine(grid: &PressureGrid, params: AffineParams) -> PressureGrid {
    let mut out = vec![0.0; GRID_PIXELS];
    warp_into(grid.as_slice(), params, &mut out);
    PressureGrid::from_f64_clipped(&out)
}

/// Mean over all 4096 pixels of the squared difference.
pub fn mse_loss(a: &PressureGrid, b: &PressureGrid) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        / GRID_PIXELS as f64
}

/// Loss of `warp(moving, params)` against `template` without allocating a grid.
pub(crate) fn warped_mse(moving: &[f32], template: &[f32], params: AffineParams, scratch: &mut [f64]) -> f64 {
    warp_into(moving, params, scratch);
    scratch
        .iter()
        .zip(template)
        .map(|(&w, &t)| {
            let d = w.clamp(0.0, 1.0) - f64::from(t);
            d * d
        })
        .sum::<f64>()
        / GRID_PIXELS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ramp() -> PressureGrid {
        let v: Vec<f32> = (0..GRID_PIXELS).map(|i| ((i * 13) % 251) as f32 / 250.0).collect();
        PressureGrid::from_values(v).unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        let g = ramp();
        assert_eq!(apply_affine(&g, AffineParams::IDENTITY), g);
    }

    #[test]
    fn half_turn_is_index_flip() {
        let g = ramp();
        let r = apply_affine(&g, AffineParams::new(PI, 0.0, 0.0, 1.0));
        assert_eq!(r, g.rotate_180());
        assert_eq!(apply_affine(&r, AffineParams::new(PI, 0.0, 0.0, 1.0)), g);
    }

    #[test]
    fn integer_shift_moves_impulse() {
        let mut g = PressureGrid::zeros();
        g.set(20, 30, 1.0);
        let out = apply_affine(&g, AffineParams::new(0.0, 2.0, 0.0, 1.0));
        assert_eq!(out.get(20, 32), 1.0);
        assert_eq!(out.nonzero_count(), 1);
        let out = apply_affine(&g, AffineParams::new(0.0, 0.0, -3.0, 1.0));
        assert_eq!(out.get(17, 30), 1.0);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = AffineParams::new(0.1, 3.0, -2.0, 1.05);
        let q = p.inverse();
        for &(r, c) in &[(0.0, 0.0), (10.0, 50.0), (31.5, 31.5), (63.0, 2.0)] {
            // forward of p is the inverse of p's source map
            let (y, x) = q.source_of(r, c);
            let (y2, x2) = p.source_of(y, x);
            assert!((y2 - r).abs() < 1e-9 && (x2 - c).abs() < 1e-9);
        }
        let back = q.inverse();
        for (a, b) in back.to_array().iter().zip(p.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_values() {
        let ones = PressureGrid::from_values(vec![1.0; GRID_PIXELS]).unwrap();
        let zeros = PressureGrid::zeros();
        assert_eq!(mse_loss(&ones, &ones), 0.0);
        assert_eq!(mse_loss(&ones, &zeros), 1.0);
        let mut one = PressureGrid::zeros();
        one.set(5, 5, 1.0);
        assert_eq!(mse_loss(&one, &zeros), 1.0 / 4096.0);
    }

    #[test]
    fn bounds() {
        let b = ParamBounds::default();
        assert!(b.contains(&AffineParams::IDENTITY));
        assert!(!b.contains(&AffineParams::new(0.6, 0.0, 0.0, 1.0)));
        let c = b.clamp(AffineParams::new(1.0, -20.0, 3.0, 2.0));
        assert_eq!(c.to_array(), [std::f64::consts::FRAC_PI_6, -16.0, 3.0, 1.3]);
    }
}
