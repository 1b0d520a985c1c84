use serde::{Deserialize, Serialize};

use super::cluster::{form_clusters, Cluster, Connectivity};
use super::null::{fwe_threshold, LeaveOneOutMaps};
use super::pvalue::ReferenceStack;
use crate::error::{Error, Result};
use crate::grid::{PressureGrid, GRID_SIZE};
use crate::registration::{build_template_with, register_all, register_with, AffineParams, RegistrationConfig};
use crate::sample::{OutlierLabel, Sample, Side};

/// Reason code for grids that could not be registered.
pub const UNREGISTRABLE: &str = "unregistrable";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpmParams {
    pub alpha_forming: f64,
    pub min_cluster: usize,
    pub alpha_fwe: f64,
    pub n_permutations: usize,
    pub connectivity: Connectivity,
}

impl Default for SpmParams {
    fn default() -> Self {
        SpmParams {
            alpha_forming: 0.03,
            min_cluster: 15,
            alpha_fwe: 0.05,
            n_permutations: 1000,
            connectivity: Connectivity::Eight,
        }
    }
}

impl SpmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_forming > 0.0 && self.alpha_forming < 1.0) {
            return Err(Error::Validation(format!("alpha_forming {} not in (0, 1)", self.alpha_forming)));
        }
        if !(self.alpha_fwe > 0.0 && self.alpha_fwe < 1.0) {
            return Err(Error::Validation(format!("alpha_fwe {} not in (0, 1)", self.alpha_fwe)));
        }
        if self.n_permutations == 0 {
            return Err(Error::Validation("n_permutations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-side normative cohort registered to the side's template.
#[derive(Clone, Debug)]
pub struct NormativeModel {
    pub side: Side,
    pub template: PressureGrid,
    stack: ReferenceStack,
}

impl NormativeModel {
    /// Builds the template from `inliers` and registers them to it.
    pub fn build(side: Side, inliers: &[PressureGrid], cfg: &RegistrationConfig) -> Result<Self> {
        let template = build_template_with(inliers, cfg, crate::registration::TEMPLATE_ITERATIONS)?;
        let registered = register_all(inliers, &template, cfg)?
            .into_iter()
            .map(|r| r.registered)
            .collect();
        Self::from_registered(side, template, registered)
    }

    /// Wraps grids that are already registered to `template`.
    pub fn from_registered(side: Side, template: PressureGrid, registered: Vec<PressureGrid>) -> Result<Self> {
        for g in &registered {
            g.validate()?;
        }
        let members = registered.into_iter().map(PressureGrid::into_values).collect();
        let stack = ReferenceStack::new(members, GRID_SIZE, GRID_SIZE)?;
        Ok(NormativeModel { side, template, stack })
    }

    pub fn stack(&self) -> &ReferenceStack {
        &self.stack
    }

    pub fn registered_grids(&self) -> Vec<PressureGrid> {
        self.stack
            .members()
            .iter()
            .map(|m| PressureGrid::from_values(m.clone()).expect("stack members are valid grids"))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SideModels {
    pub left: NormativeModel,
    pub right: NormativeModel,
}

impl SideModels {
    pub fn get(&self, side: Side) -> &NormativeModel {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Normative models for both sides from the valid samples in `samples`.
pub fn build_side_models(samples: &[&Sample], cfg: &RegistrationConfig) -> Result<SideModels> {
    let grids = |side: Side| -> Vec<PressureGrid> {
        samples
            .iter()
            .filter(|s| s.label == OutlierLabel::Valid && s.side == side)
            .map(|s| s.grid.clone())
            .collect()
    };
    Ok(SideModels {
        left: NormativeModel::build(Side::Left, &grids(Side::Left), cfg)?,
        right: NormativeModel::build(Side::Right, &grids(Side::Right), cfg)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpmDecision {
    /// Per-pixel p-values in the template frame; empty when registration failed.
    pub p_map: Vec<f64>,
    /// Clusters surviving `min_cluster`.
    pub clusters: Vec<Cluster>,
    pub fwe_threshold: usize,
    pub significant: Vec<Cluster>,
    pub is_outlier: bool,
    pub reason: Option<String>,
    /// Transform from the sample frame into the template frame.
    pub registration: Option<AffineParams>,
}

impl SpmDecision {
    pub fn max_cluster(&self) -> usize {
        self.clusters.iter().map(Cluster::size).max().unwrap_or(0)
    }

    /// Decision from a p-map that is already in the template frame.
    pub fn from_pmap(p_map: Vec<f64>, params: &SpmParams, fwe_threshold: usize) -> SpmDecision {
        let clusters = form_clusters(
            &p_map,
            GRID_SIZE,
            GRID_SIZE,
            params.alpha_forming,
            params.min_cluster,
            params.connectivity,
        );
        let significant: Vec<Cluster> = clusters.iter().filter(|c| c.size() > fwe_threshold).cloned().collect();
        SpmDecision {
            p_map,
            is_outlier: !significant.is_empty(),
            clusters,
            fwe_threshold,
            significant,
            reason: None,
            registration: None,
        }
    }
}

/// One line of the decisions JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: String,
    pub is_outlier: bool,
    pub n_significant: usize,
    pub fwe_threshold: usize,
    pub max_cluster: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<AffineParams>,
    /// Pixel indices of each significant cluster, template frame.
    #[serde(default)]
    pub significant_pixels: Vec<Vec<usize>>,
}

impl DecisionRecord {
    pub fn new(id: &str, d: &SpmDecision) -> Self {
        DecisionRecord {
            id: id.to_string(),
            is_outlier: d.is_outlier,
            n_significant: d.significant.len(),
            fwe_threshold: d.fwe_threshold,
            max_cluster: d.max_cluster(),
            reason: d.reason.clone(),
            registration: d.registration,
            significant_pixels: d.significant.iter().map(|c| c.pixels.clone()).collect(),
        }
    }

    /// Rebuilds the parts of a decision needed for rendering.
    pub fn to_decision(&self) -> SpmDecision {
        let significant: Vec<Cluster> = self
            .significant_pixels
            .iter()
            .map(|p| Cluster { pixels: p.clone() })
            .collect();
        SpmDecision {
            p_map: Vec::new(),
            clusters: significant.clone(),
            fwe_threshold: self.fwe_threshold,
            significant,
            is_outlier: self.is_outlier,
            reason: self.reason.clone(),
            registration: self.registration,
        }
    }
}

/// Normative models with their calibrated per-side cluster thresholds.
#[derive(Clone, Debug)]
pub struct Detector {
    models: SideModels,
    params: SpmParams,
    registration: RegistrationConfig,
    null: [Vec<usize>; 2],
    thresholds: [usize; 2],
}

impl Detector {
    /// Computes each side's permutation null and FWE threshold.
    pub fn calibrate(models: SideModels, params: SpmParams, seed: u64, registration: RegistrationConfig) -> Result<Self> {
        params.validate()?;
        let loo = [
            LeaveOneOutMaps::new(models.left.stack())?,
            LeaveOneOutMaps::new(models.right.stack())?,
        ];
        Ok(Self::with_loo(models, &loo, params, seed, registration))
    }

    pub(crate) fn with_loo(
        models: SideModels,
        loo: &[LeaveOneOutMaps; 2],
        params: SpmParams,
        seed: u64,
        registration: RegistrationConfig,
    ) -> Self {
        let null = [Side::Left, Side::Right].map(|s| loo[s.index()].null_distribution(&params, seed, s.index() as u64));
        let thresholds = [fwe_threshold(&null[0], params.alpha_fwe), fwe_threshold(&null[1], params.alpha_fwe)];
        Detector { models, params, registration, null, thresholds }
    }

    pub fn params(&self) -> &SpmParams {
        &self.params
    }

    pub fn models(&self) -> &SideModels {
        &self.models
    }

    pub fn null_distribution(&self, side: Side) -> &[usize] {
        &self.null[side.index()]
    }

    pub fn fwe_threshold(&self, side: Side) -> usize {
        self.thresholds[side.index()]
    }

    /// Tests a grid against the model of the annotated `side`.
    pub fn detect_grid(&self, grid: &PressureGrid, side: Side) -> SpmDecision {
        let model = self.models.get(side);
        let threshold = self.fwe_threshold(side);
        match register_with(grid, &model.template, &self.registration) {
            Ok(reg) => {
                let p_map = model.stack().pvalue_map(reg.registered.as_slice());
                let mut d = SpmDecision::from_pmap(p_map, &self.params, threshold);
                d.registration = Some(reg.params);
                d
            }
            // a grid that cannot be registered is an acquisition anomaly in itself
            Err(_) => SpmDecision {
                p_map: Vec::new(),
                clusters: Vec::new(),
                fwe_threshold: threshold,
                significant: Vec::new(),
                is_outlier: true,
                reason: Some(UNREGISTRABLE.to_string()),
                registration: None,
            },
        }
    }

    /// Tests a sample against the model selected by its annotated side.
    pub fn detect(&self, sample: &Sample) -> SpmDecision {
        self.detect_grid(&sample.grid, sample.side)
    }
}
