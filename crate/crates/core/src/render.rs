//! Three-panel figures: raw map, SPM cluster contours, attribution heatmap.
//!
//! All panels are 512×512 (each grid pixel becomes an 8×8 block), 8-bit
//! RGB, with intensity 0 drawn white and 1 black.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{PressureGrid, GRID_PIXELS, GRID_SIZE};
use crate::spm::SpmDecision;

pub const UPSCALE: usize = 8;
pub const PANEL_SIZE: usize = GRID_SIZE * UPSCALE;
pub const MARGIN: usize = 8;

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
const WHITE: [u8; 3] = [255, 255, 255];

/// Attribution magnitudes below this fraction of the maximum are dropped.
pub const ATTRIBUTION_FLOOR: f64 = 0.2;
const BILATERAL_RADIUS: isize = 2;
const BILATERAL_SIGMA_SPACE: f64 = 2.0;
const BILATERAL_SIGMA_RANGE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        RgbImage { width, height, data: color.repeat(width * height) }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&color);
    }

    fn fill_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize, color: [u8; 3]) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.put(x, y, color);
            }
        }
    }

    fn blit(&mut self, src: &RgbImage, x0: usize, y0: usize) {
        for y in 0..src.height {
            let from = 3 * y * src.width;
            let to = 3 * ((y0 + y) * self.width + x0);
            self.data[to..to + 3 * src.width].copy_from_slice(&src.data[from..from + 3 * src.width]);
        }
    }

    /// Grid cell color (top-left pixel of its block).
    pub fn cell(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixel(col * UPSCALE, row * UPSCALE)
    }

    fn fill_cell(&mut self, row: usize, col: usize, color: [u8; 3]) {
        self.fill_rect(col * UPSCALE, row * UPSCALE, UPSCALE, UPSCALE, color);
    }

    pub fn encode_png(&self, out: impl Write) -> Result<()> {
        let png_err = |e: png::EncodingError| Error::DataFormat(format!("png encoding: {e}"));
        let mut enc = png::Encoder::new(out, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(&self.data).map_err(png_err)?;
        w.finish().map_err(png_err)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        self.encode_png(&mut buf)?;
        buf.flush().map_err(|e| Error::io(path, e))
    }
}

/// Gray level of an intensity: `round((1 - v) · 255)`, so 0.5 maps to 128.
pub fn gray_level(v: f32) -> u8 {
    ((1.0 - f64::from(v).clamp(0.0, 1.0)) * 255.0).round() as u8
}

pub fn render_grayscale(grid: &PressureGrid) -> RgbImage {
    let mut img = RgbImage::filled(PANEL_SIZE, PANEL_SIZE, WHITE);
    for (i, &v) in grid.as_slice().iter().enumerate() {
        let g = gray_level(v);
        img.fill_cell(i / GRID_SIZE, i % GRID_SIZE, [g, g, g]);
    }
    img
}

/// Cluster membership in the sample frame. Cluster pixels are indexed in
/// the template frame; each sample pixel is mapped forward through the
/// registration and looked up at the nearest template pixel.
fn cluster_mask(pixels: &[usize], decision: &SpmDecision) -> Vec<bool> {
    let mut in_template = vec![false; GRID_PIXELS];
    for &p in pixels {
        in_template[p] = true;
    }
    let Some(params) = decision.registration else {
        return in_template;
    };
    let forward = params.inverse();
    (0..GRID_PIXELS)
        .map(|i| {
            let (y, x) = forward.source_of((i / GRID_SIZE) as f64, (i % GRID_SIZE) as f64);
            let (r, c) = (y.round(), x.round());
            r >= 0.0
                && c >= 0.0
                && (r as usize) < GRID_SIZE
                && (c as usize) < GRID_SIZE
                && in_template[r as usize * GRID_SIZE + c as usize]
        })
        .collect()
}

/// Mask pixels with a 4-neighbour outside the mask or outside the grid.
pub fn boundary_pixels(mask: &[bool]) -> Vec<usize> {
    let n = GRID_SIZE;
    (0..GRID_PIXELS)
        .filter(|&i| {
            if !mask[i] {
                return false;
            }
            let (r, c) = (i / n, i % n);
            r == 0 || c == 0 || r == n - 1 || c == n - 1 || !mask[i - n] || !mask[i + n] || !mask[i - 1] || !mask[i + 1]
        })
        .collect()
}

/// Grayscale base with the boundary of every significant cluster in green.
pub fn render_spm_overlay(grid: &PressureGrid, decision: &SpmDecision) -> RgbImage {
    let mut img = render_grayscale(grid);
    for cluster in &decision.significant {
        for i in boundary_pixels(&cluster_mask(&cluster.pixels, decision)) {
            img.fill_cell(i / GRID_SIZE, i % GRID_SIZE, GREEN);
        }
    }
    img
}

/// Normalizes by max|a|, drops entries below [`ATTRIBUTION_FLOOR`], then
/// applies a 5×5 bilateral filter. Returns `None` for an all-zero map.
pub fn prepare_attribution(attribution: &[f32]) -> Option<Vec<f64>> {
    assert_eq!(attribution.len(), GRID_PIXELS);
    let max = attribution.iter().map(|a| f64::from(a.abs())).fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return None;
    }
    let a: Vec<f64> = attribution
        .iter()
        .map(|&v| {
            let v = f64::from(v) / max;
            if v.abs() < ATTRIBUTION_FLOOR { 0.0 } else { v }
        })
        .collect();
    Some(bilateral(&a))
}

fn bilateral(a: &[f64]) -> Vec<f64> {
    let n = GRID_SIZE as isize;
    let ss = 2.0 * BILATERAL_SIGMA_SPACE * BILATERAL_SIGMA_SPACE;
    let sr = 2.0 * BILATERAL_SIGMA_RANGE * BILATERAL_SIGMA_RANGE;
    (0..GRID_PIXELS)
        .map(|i| {
            let (r, c) = ((i / GRID_SIZE) as isize, (i % GRID_SIZE) as isize);
            let center = a[i];
            let (mut num, mut den) = (0.0, 0.0);
            for dr in -BILATERAL_RADIUS..=BILATERAL_RADIUS {
                for dc in -BILATERAL_RADIUS..=BILATERAL_RADIUS {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= n || cc >= n {
                        continue;
                    }
                    let v = a[(rr * n + cc) as usize];
                    let d = v - center;
                    let w = (-((dr * dr + dc * dc) as f64) / ss - d * d / sr).exp();
                    num += w * v;
                    den += w;
                }
            }
            num / den
        })
        .collect()
}

fn blend(base: u8, color: u8, alpha: f64) -> u8 {
    ((1.0 - alpha) * f64::from(base) + alpha * f64::from(color)).round() as u8
}

/// Grayscale base tinted blue where the attribution is positive and red
/// where negative, opacity `|a|` after [`prepare_attribution`]. Only
/// foreground (nonzero) pressure pixels are tinted.
pub fn render_attribution_overlay(grid: &PressureGrid, attribution: &[f32]) -> RgbImage {
    let mut img = render_grayscale(grid);
    let Some(a) = prepare_attribution(attribution) else {
        return img;
    };
    for (i, (&v, &g)) in a.iter().zip(grid.as_slice()).enumerate() {
        if v == 0.0 || g <= 0.0 {
            continue;
        }
        let base = gray_level(g);
        let color = if v > 0.0 { BLUE } else { RED };
        let alpha = v.abs().min(1.0);
        img.fill_cell(i / GRID_SIZE, i % GRID_SIZE, color.map(|c| blend(base, c, alpha)));
    }
    img
}

pub const MISSING_ATTRIBUTION: &str = "NO ATTRIBUTION";

/// Panels raw | SPM | attribution separated by white margins. A missing
/// attribution yields a blank panel with a caption.
pub fn render_panel(grid: &PressureGrid, decision: &SpmDecision, attribution: Option<&[f32]>) -> RgbImage {
    let mut out = RgbImage::filled(3 * PANEL_SIZE + 2 * MARGIN, PANEL_SIZE, WHITE);
    out.blit(&render_grayscale(grid), 0, 0);
    out.blit(&render_spm_overlay(grid, decision), PANEL_SIZE + MARGIN, 0);
    let third = match attribution {
        Some(a) => render_attribution_overlay(grid, a),
        None => placeholder(MISSING_ATTRIBUTION),
    };
    out.blit(&third, 2 * (PANEL_SIZE + MARGIN), 0);
    out
}

fn placeholder(caption: &str) -> RgbImage {
    let mut img = RgbImage::filled(PANEL_SIZE, PANEL_SIZE, [235, 235, 235]);
    const SCALE: usize = 4;
    let width = caption.len() * 6 * SCALE;
    let x0 = PANEL_SIZE.saturating_sub(width) / 2;
    let y0 = (PANEL_SIZE - 7 * SCALE) / 2;
    for (k, ch) in caption.chars().enumerate() {
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    img.fill_rect(x0 + (6 * k + col) * SCALE, y0 + row * SCALE, SCALE, SCALE, [90, 90, 90]);
                }
            }
        }
    }
    img
}

// 5×7 glyphs, one byte per row, MSB of the low five bits leftmost.
fn glyph(ch: char) -> [u8; 7] {
    match ch {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        _ => [0; 7],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::AffineParams;
    use crate::spm::{Cluster, SpmParams};

    fn grid(v: f32) -> PressureGrid {
        PressureGrid::from_values(vec![v; GRID_PIXELS]).unwrap()
    }

    fn count(img: &RgbImage, color: [u8; 3]) -> usize {
        img.data.chunks(3).filter(|p| *p == color).count()
    }

    fn decision(clusters: Vec<Vec<usize>>) -> SpmDecision {
        let mut d = SpmDecision::from_pmap(vec![1.0; GRID_PIXELS], &SpmParams::default(), 0);
        d.significant = clusters.into_iter().map(|pixels| Cluster { pixels }).collect();
        d.is_outlier = !d.significant.is_empty();
        d
    }

    fn block(r0: usize, c0: usize, h: usize, w: usize) -> Vec<usize> {
        (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| r * GRID_SIZE + c)).collect()
    }

    #[test]
    fn grayscale_levels() {
        assert_eq!(count(&render_grayscale(&grid(0.0)), WHITE), PANEL_SIZE * PANEL_SIZE);
        assert_eq!(count(&render_grayscale(&grid(1.0)), [0, 0, 0]), PANEL_SIZE * PANEL_SIZE);
        assert_eq!(render_grayscale(&grid(0.5)).pixel(100, 200), [128, 128, 128]);
    }

    #[test]
    fn no_clusters_equals_grayscale() {
        let g = crate::phantom::phantom_grid(&Default::default(), 3, crate::Side::Left);
        assert_eq!(render_spm_overlay(&g, &decision(vec![])), render_grayscale(&g));
    }

    #[test]
    fn three_by_three_cluster_has_eight_boundary_cells() {
        let img = render_spm_overlay(&grid(0.5), &decision(vec![block(10, 10, 3, 3)]));
        assert_eq!(count(&img, GREEN), 8 * UPSCALE * UPSCALE);
        assert_eq!(img.cell(11, 11), [128, 128, 128]);
        assert_eq!(img.cell(10, 10), GREEN);
    }

    #[test]
    fn two_clusters_two_contours() {
        let img = render_spm_overlay(&grid(0.2), &decision(vec![block(5, 5, 4, 4), block(40, 40, 3, 5)]));
        // 4×4 ring = 12, 3×5 ring = 12
        assert_eq!(count(&img, GREEN), 24 * UPSCALE * UPSCALE);
    }

    #[test]
    fn clusters_follow_registration() {
        let mut d = decision(vec![block(10, 10, 3, 3)]);
        // the sample is the template shifted right by 5 columns
        d.registration = Some(AffineParams::new(0.0, -5.0, 0.0, 1.0));
        let img = render_spm_overlay(&grid(0.5), &d);
        assert_eq!(img.cell(10, 15), GREEN);
        assert_eq!(img.cell(10, 10), [128, 128, 128]);
        assert_eq!(count(&img, GREEN), 8 * UPSCALE * UPSCALE);
    }

    #[test]
    fn attribution_threshold_and_sign() {
        let mut a = vec![0.0f32; GRID_PIXELS];
        a[20 * GRID_SIZE + 20] = 1.0;
        a[50 * GRID_SIZE + 50] = 0.1;
        let p = prepare_attribution(&a).unwrap();
        assert_eq!(p[50 * GRID_SIZE + 50], 0.0);
        assert!(p[20 * GRID_SIZE + 20] > 0.9);

        let g = grid(0.5);
        let pos = render_attribution_overlay(&g, &a);
        let neg = render_attribution_overlay(&g, &a.iter().map(|v| -v).collect::<Vec<_>>());
        assert_eq!(pos.cell(20, 20)[2], neg.cell(20, 20)[0]);
        assert_eq!(pos.cell(20, 20)[0], neg.cell(20, 20)[2]);
        assert!(pos.cell(20, 20)[2] > 200);
        assert_eq!(pos.cell(50, 50), [128, 128, 128]);
    }

    #[test]
    fn constant_attribution_uniform_tint() {
        let g = crate::phantom::phantom_grid(&Default::default(), 4, crate::Side::Right);
        let img = render_attribution_overlay(&g, &vec![0.3f32; GRID_PIXELS]);
        for i in 0..GRID_PIXELS {
            let v = g.as_slice()[i];
            let want = if v > 0.0 { [0, 0, 255] } else { WHITE };
            assert_eq!(img.cell(i / GRID_SIZE, i % GRID_SIZE), want);
        }
    }

    #[test]
    fn zero_attribution_is_plain_grayscale() {
        let g = grid(0.7);
        assert_eq!(render_attribution_overlay(&g, &vec![0.0; GRID_PIXELS]), render_grayscale(&g));
    }

    #[test]
    fn panel_layout_and_determinism() {
        let g = grid(0.4);
        let d = decision(vec![block(1, 1, 3, 3)]);
        let attr = vec![0.5f32; GRID_PIXELS];
        let full = render_panel(&g, &d, Some(&attr));
        assert_eq!((full.width, full.height), (3 * 512 + 2 * MARGIN, 512));
        let blank = render_panel(&g, &d, None);
        assert_ne!(full, blank);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        full.encode_png(&mut a).unwrap();
        render_panel(&g, &d, Some(&attr)).encode_png(&mut b).unwrap();
        assert_eq!(a, b);
        // margins stay white
        assert_eq!(full.pixel(PANEL_SIZE + 3, 100), WHITE);
    }
}
