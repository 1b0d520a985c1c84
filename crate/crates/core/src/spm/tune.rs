use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;

use super::detector::{build_side_models, SideModels, SpmDecision, SpmParams};
use super::null::{fwe_threshold, LeaveOneOutMaps};
use crate::error::{Error, Result};
use crate::evaluation::ConfusionMatrix;
use crate::registration::{register_with, RegistrationConfig};
use crate::rng::{derive_key, stream};
use crate::sample::{Sample, Side};

pub const DEFAULT_SEARCH_BUDGET: usize = 25;

/// Ranges sampled by the randomized search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpace {
    pub alpha_forming: (f64, f64),
    pub min_cluster: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            alpha_forming: (0.01, 0.05),
            min_cluster: (0, 30),
        }
    }
}

/// Validation sample reduced to what the search needs: its template-frame
/// p-map (`None` if it could not be registered) and ground truth.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub id: String,
    pub side: Side,
    pub is_outlier: bool,
    pub p_map: Option<Vec<f64>>,
}

/// Registers each sample to its annotated side's template and computes its p-map.
pub fn prepare_samples(models: &SideModels, samples: &[&Sample], cfg: &RegistrationConfig) -> Vec<PreparedSample> {
    samples
        .par_iter()
        .map(|s| {
            let model = models.get(s.side);
            let p_map = register_with(&s.grid, &model.template, cfg)
                .ok()
                .map(|r| model.stack().pvalue_map(r.registered.as_slice()));
            PreparedSample {
                id: s.id.clone(),
                side: s.side,
                is_outlier: s.label.is_outlier(),
                p_map,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub best: SpmParams,
    pub best_f1: f64,
    /// Every candidate with its validation F1, in draw order.
    pub candidates: Vec<(SpmParams, f64)>,
}

/// Higher F1 first, then smaller `min_cluster`, then smaller `alpha_forming`.
fn rank(a: &(SpmParams, f64), b: &(SpmParams, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0.min_cluster.cmp(&b.0.min_cluster))
        .then(a.0.alpha_forming.total_cmp(&b.0.alpha_forming))
}

/// Draws `budget` candidates and scores each by validation F1 (outlier = positive).
pub fn search_params(
    loo: &[LeaveOneOutMaps; 2],
    prepared: &[PreparedSample],
    base: &SpmParams,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::Validation("search budget must be >= 1".into()));
    }
    let positives = prepared.iter().filter(|p| p.is_outlier).count();
    if positives == 0 || positives == prepared.len() {
        return Err(Error::Precondition(
            "validation set must contain both inliers and outliers".into(),
        ));
    }
    let null_seed = derive_key(seed, "spm-tune-null", &[]);
    let candidates: Vec<SpmParams> = (0..budget)
        .map(|j| {
            let mut rng = stream(seed, "spm-tune", &[j as u64]);
            SpmParams {
                alpha_forming: rng.gen_range(space.alpha_forming.0..=space.alpha_forming.1),
                min_cluster: rng.gen_range(space.min_cluster.0..=space.min_cluster.1),
                ..*base
            }
        })
        .collect();
    let scored: Vec<(SpmParams, f64)> = candidates
        .par_iter()
        .map(|c| {
            let thresholds = [Side::Left, Side::Right].map(|s| {
                let null = loo[s.index()].null_distribution(c, null_seed, s.index() as u64);
                fwe_threshold(&null, c.alpha_fwe)
            });
            let cm = ConfusionMatrix::from_pairs(prepared.iter().map(|p| {
                let flagged = match &p.p_map {
                    None => true,
                    Some(m) => SpmDecision::from_pmap(m.clone(), c, thresholds[p.side.index()]).is_outlier,
                };
                (p.is_outlier, flagged)
            }));
            (*c, cm.f1())
        })
        .collect();
    let best = scored
        .iter()
        .min_by(|a, b| rank(a, b))
        .copied()
        .expect("budget >= 1");
    Ok(TuneResult { best: best.0, best_f1: best.1, candidates: scored })
}

/// Randomized search over `alpha_forming` and `min_cluster`.
///
/// Normative models are built from `train_inliers` only; candidates are
/// scored on `validation`.
pub fn tune(
    train_inliers: &[&Sample],
    validation: &[&Sample],
    base: &SpmParams,
    budget: usize,
    seed: u64,
    cfg: &RegistrationConfig,
) -> Result<TuneResult> {
    base.validate()?;
    let positives = validation.iter().filter(|s| s.label.is_outlier()).count();
    if positives == 0 || positives == validation.len() {
        return Err(Error::Precondition(
            "validation set must contain both inliers and outliers".into(),
        ));
    }
    let models = build_side_models(train_inliers, cfg)?;
    let loo = [
        LeaveOneOutMaps::new(models.left.stack())?,
        LeaveOneOutMaps::new(models.right.stack())?,
    ];
    let prepared = prepare_samples(&models, validation, cfg);
    search_params(&loo, &prepared, base, &SearchSpace::default(), budget, seed)
}
