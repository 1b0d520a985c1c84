//! Affine registration of pressure grids to a per-side template.
//!
//! [`register`] searches the bounded similarity parameters (angle, shift,
//! zoom) minimizing the MSE between the warped moving grid and the template.
//! Gradients are central finite differences. [`build_template`] produces
//! the per-side reference by iterated mean-and-register.

mod affine;
pub mod optimizer;

use rayon::prelude::*;

pub use affine::{apply_affine, mse_loss, AffineParams, ParamBounds, CENTER};
pub(crate) use affine::warped_mse;

use crate::error::{Error, Result};
use crate::grid::{normalize_intensity, PressureGrid, GRID_PIXELS};
use optimizer::{minimize, LbfgsbConfig, Objective};

#[derive(Clone, Debug)]
pub struct RegistrationConfig {
    pub bounds: ParamBounds,
    /// Extra starting angles tried besides 0.
    pub extra_start_angles: Vec<f64>,
    /// Central-difference steps for (angle, shift_x, shift_y, zoom).
    pub fd_steps: [f64; 4],
    pub optimizer: LbfgsbConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            bounds: ParamBounds::default(),
            extra_start_angles: vec![0.15, -0.15],
            fd_steps: [1e-3, 1e-2, 1e-2, 1e-3],
            optimizer: LbfgsbConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    pub params: AffineParams,
    pub registered: PressureGrid,
    /// Loss of the unregistered moving grid.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

// Optimizer coordinates are parameters divided by these, which puts one unit
// at roughly one pixel of displacement at the foot's extent.
const PARAM_SCALE: [f64; 4] = [0.05, 1.0, 1.0, 0.05];

struct WarpObjective<'a> {
    moving: &'a [f32],
    template: &'a [f32],
    fd_steps: [f64; 4],
    scratch: Vec<f64>,
}

impl WarpObjective<'_> {
    fn loss(&mut self, params: [f64; 4]) -> f64 {
        warped_mse(self.moving, self.template, AffineParams::from_array(params), &mut self.scratch)
    }

    /// Central-difference gradient in parameter units.
    fn param_gradient(&mut self, params: [f64; 4], steps: [f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for i in 0..4 {
            let mut hi = params;
            let mut lo = params;
            hi[i] += steps[i];
            lo[i] -= steps[i];
            g[i] = (self.loss(hi) - self.loss(lo)) / (2.0 * steps[i]);
        }
        g
    }
}

fn to_params(z: &[f64]) -> [f64; 4] {
    std::array::from_fn(|i| z[i] * PARAM_SCALE[i])
}

impl Objective for WarpObjective<'_> {
    fn value(&mut self, z: &[f64]) -> f64 {
        self.loss(to_params(z))
    }

    fn gradient(&mut self, z: &[f64], _fx: f64) -> Vec<f64> {
        let g = self.param_gradient(to_params(z), self.fd_steps);
        g.iter().zip(PARAM_SCALE).map(|(gi, s)| gi * s).collect()
    }
}

/// Finite-difference gradient of `mse(warp(moving, params), template)` with
/// the given steps, in parameter units.
pub fn loss_gradient(
    moving: &PressureGrid,
    template: &PressureGrid,
    params: AffineParams,
    steps: [f64; 4],
) -> [f64; 4] {
    let mut obj = WarpObjective {
        moving: moving.as_slice(),
        template: template.as_slice(),
        fd_steps: steps,
        scratch: vec![0.0; GRID_PIXELS],
    };
    obj.param_gradient(params.to_array(), steps)
}

/// Shift that moves the moving grid's center of mass onto the template's.
pub fn center_of_mass_shift(moving: &PressureGrid, template: &PressureGrid) -> Result<(f64, f64)> {
    let (mr, mc) = moving
        .center_of_mass()
        .ok_or_else(|| Error::DegenerateInput("moving grid is all zero".into()))?;
    let (tr, tc) = template
        .center_of_mass()
        .ok_or_else(|| Error::DegenerateInput("template grid is all zero".into()))?;
    Ok((tc - mc, tr - mr))
}

/// Registers `moving` to `template` with the default configuration.
pub fn register(moving: &PressureGrid, template: &PressureGrid) -> Result<RegistrationResult> {
    register_with(moving, template, &RegistrationConfig::default())
}

pub fn register_with(
    moving: &PressureGrid,
    template: &PressureGrid,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    moving.validate()?;
    template.validate()?;
    let (sx, sy) = center_of_mass_shift(moving, template)?;

    let lower: Vec<f64> = cfg.bounds.lower().iter().zip(PARAM_SCALE).map(|(b, s)| b / s).collect();
    let upper: Vec<f64> = cfg.bounds.upper().iter().zip(PARAM_SCALE).map(|(b, s)| b / s).collect();
    let mut obj = WarpObjective {
        moving: moving.as_slice(),
        template: template.as_slice(),
        fd_steps: cfg.fd_steps,
        scratch: vec![0.0; GRID_PIXELS],
    };
    let initial_loss = obj.loss(AffineParams::IDENTITY.to_array());

    let mut best: Option<(AffineParams, f64, usize, bool)> = None;
    for angle in std::iter::once(0.0).chain(cfg.extra_start_angles.iter().copied()) {
        let start = cfg.bounds.clamp(AffineParams::new(angle, sx, sy, 1.0)).to_array();
        let z0: Vec<f64> = start.iter().zip(PARAM_SCALE).map(|(p, s)| p / s).collect();
        let m = minimize(&mut obj, &z0, &lower, &upper, &cfg.optimizer);
        let params = cfg.bounds.clamp(AffineParams::from_array(to_params(&m.x)));
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((params, m.value, m.iterations, m.converged));
        }
    }
    let (mut params, mut final_loss, iterations, converged) = best.expect("at least one start");
    if final_loss > initial_loss {
        params = AffineParams::IDENTITY;
        final_loss = initial_loss;
    }
    Ok(RegistrationResult {
        params,
        registered: apply_affine(moving, params),
        initial_loss,
        final_loss,
        iterations,
        converged,
    })
}

/// Registers every grid to `template`, in parallel, preserving order.
pub fn register_all(
    grids: &[PressureGrid],
    template: &PressureGrid,
    cfg: &RegistrationConfig,
) -> Result<Vec<RegistrationResult>> {
    grids.par_iter().map(|g| register_with(g, template, cfg)).collect()
}

fn pixel_mean<'a>(grids: impl Iterator<Item = &'a PressureGrid>) -> Result<PressureGrid> {
    let mut acc = vec![0.0f64; GRID_PIXELS];
    let mut n = 0usize;
    for g in grids {
        for (a, &v) in acc.iter_mut().zip(g.as_slice()) {
            *a += f64::from(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Precondition("mean of zero grids".into()));
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    normalize_intensity(&acc)
}

/// Number of register-and-average refinements after the initial mean.
pub const TEMPLATE_ITERATIONS: usize = 3;

/// Per-side reference grid: mean after center-of-mass alignment, then
/// [`TEMPLATE_ITERATIONS`] rounds of registering every grid to the current
/// template and averaging.
pub fn build_template(grids: &[PressureGrid]) -> Result<PressureGrid> {
    build_template_with(grids, &RegistrationConfig::default(), TEMPLATE_ITERATIONS)
}

/// Mean of the grids after moving each center of mass to the grid center.
pub fn initial_template(grids: &[PressureGrid]) -> Result<PressureGrid> {
    let centered = grids
        .iter()
        .map(|g| {
            let (r, c) = g
                .center_of_mass()
                .ok_or_else(|| Error::DegenerateInput("template input grid is all zero".into()))?;
            Ok(apply_affine(g, AffineParams::new(0.0, CENTER - c, CENTER - r, 1.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    pixel_mean(centered.iter())
}

pub fn build_template_with(
    grids: &[PressureGrid],
    cfg: &RegistrationConfig,
    iterations: usize,
) -> Result<PressureGrid> {
    if grids.len() < 2 {
        return Err(Error::Precondition(format!(
            "template needs at least 2 grids, got {}",
            grids.len()
        )));
    }
    let mut template = initial_template(grids)?;
    for _ in 0..iterations {
        let registered = register_all(grids, &template, cfg)?;
        template = pixel_mean(registered.iter().map(|r| &r.registered))?;
    }
    Ok(template)
}
