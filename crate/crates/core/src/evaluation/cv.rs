//! Nested cross-validation over a shared [`FoldPlan`].

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{ClassConfusion, ConfusionMatrix, Summary};
use super::predictions::Prediction;
use crate::error::{Error, Result};
use crate::registration::RegistrationConfig;
use crate::rng::derive_key;
use crate::sample::{OutlierLabel, Sample};
use crate::spm::{build_side_models, tune, DecisionRecord, Detector, SpmParams, DEFAULT_SEARCH_BUDGET};

#[derive(Clone, Debug)]
pub struct SpmArmConfig {
    /// Fixed parameters; `alpha_forming` and `min_cluster` are tuned per fold.
    pub base: SpmParams,
    pub budget: usize,
    pub registration: RegistrationConfig,
}

impl Default for SpmArmConfig {
    fn default() -> Self {
        SpmArmConfig {
            base: SpmParams::default(),
            budget: DEFAULT_SEARCH_BUDGET,
            registration: RegistrationConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum DetectorArm {
    Spm(SpmArmConfig),
    /// Precomputed multiclass predictions keyed by sample id.
    External(BTreeMap<String, Prediction>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub mcc: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuned: Option<SpmParams>,
}

/// How many samples of one ground-truth class were flagged as outliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDetection {
    pub label: u8,
    pub name: String,
    pub total: u64,
    pub flagged: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub arm: String,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mcc: Summary,
    pub f1: Summary,
    /// Sum of the per-fold binary matrices.
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_confusion: Option<ClassConfusion>,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub report: MetricReport,
    /// SPM decisions for every outer-test sample, fold by fold; empty for the external arm.
    pub decisions: Vec<DecisionRecord>,
}

struct FoldOutput {
    result: FoldResult,
    /// (actual, predicted) per test sample; predicted is binary for SPM.
    outcomes: Vec<(OutlierLabel, bool, Option<OutlierLabel>)>,
    decisions: Vec<DecisionRecord>,
}

fn select<'a>(index: &BTreeMap<&str, &'a Sample>, ids: &[String]) -> Result<Vec<&'a Sample>> {
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Validation(format!("fold plan names unknown sample {id}")))
        })
        .collect()
}

fn assert_disjoint(fold: usize, used: &[&Sample], test: &[&Sample]) -> Result<()> {
    let test_ids: HashSet<&str> = test.iter().map(|s| s.id.as_str()).collect();
    if let Some(s) = used.iter().find(|s| test_ids.contains(s.id.as_str())) {
        return Err(Error::Validation(format!("fold {fold}: test sample {} leaked into training", s.id)));
    }
    Ok(())
}

fn spm_fold(
    fold: usize,
    train: &[&Sample],
    validation: &[&Sample],
    test: &[&Sample],
    cfg: &SpmArmConfig,
    seed: u64,
) -> Result<FoldOutput> {
    let inner_inliers: Vec<&Sample> = train.iter().copied().filter(|s| !s.label.is_outlier()).collect();
    assert_disjoint(fold, &inner_inliers, test)?;
    assert_disjoint(fold, validation, test)?;
    let tuned = tune(
        &inner_inliers,
        validation,
        &cfg.base,
        cfg.budget,
        derive_key(seed, "cv-tune", &[fold as u64]),
        &cfg.registration,
    )?;

    // final normative model from every outer-train inlier
    let outer_inliers: Vec<&Sample> = train
        .iter()
        .chain(validation)
        .copied()
        .filter(|s| !s.label.is_outlier())
        .collect();
    assert_disjoint(fold, &outer_inliers, test)?;
    let models = build_side_models(&outer_inliers, &cfg.registration)?;
    let detector = Detector::calibrate(
        models,
        tuned.best,
        derive_key(seed, "cv-null", &[fold as u64]),
        cfg.registration.clone(),
    )?;

    use rayon::prelude::*;
    let decisions: Vec<DecisionRecord> = test
        .par_iter()
        .map(|s| DecisionRecord::new(&s.id, &detector.detect(s)))
        .collect();
    let outcomes: Vec<_> = test
        .iter()
        .zip(&decisions)
        .map(|(s, d)| (s.label, d.is_outlier, None))
        .collect();
    let confusion = ConfusionMatrix::from_pairs(outcomes.iter().map(|o| (o.0.is_outlier(), o.1)));
    Ok(FoldOutput {
        result: FoldResult {
            fold,
            n_test: test.len(),
            mcc: confusion.mcc(),
            f1: confusion.f1(),
            confusion,
            tuned: Some(tuned.best),
        },
        outcomes,
        decisions,
    })
}

fn external_fold(fold: usize, test: &[&Sample], predictions: &BTreeMap<String, Prediction>) -> Result<FoldOutput> {
    let outcomes = test
        .iter()
        .map(|s| {
            let p = predictions
                .get(&s.id)
                .ok_or_else(|| Error::DataFormat(format!("no prediction for sample {}", s.id)))?;
            Ok((s.label, p.predicted_label.is_outlier(), Some(p.predicted_label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let confusion = ConfusionMatrix::from_pairs(outcomes.iter().map(|o| (o.0.is_outlier(), o.1)));
    Ok(FoldOutput {
        result: FoldResult {
            fold,
            n_test: test.len(),
            mcc: confusion.mcc(),
            f1: confusion.f1(),
            confusion,
            tuned: None,
        },
        outcomes,
        decisions: Vec::new(),
    })
}

/// Evaluates `arm` on every outer fold of `plan`.
///
/// Metrics are binary (outlier = positive) per fold; the external arm's
/// multiclass predictions are binarized first and additionally tallied in a
/// 5×5 class confusion.
pub fn run_nested_cv(samples: &[Sample], plan: &FoldPlan, arm: &DetectorArm, seed: u64) -> Result<CvOutcome> {
    plan.validate(samples)?;
    let index: BTreeMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();

    let mut outputs = Vec::with_capacity(plan.folds.len());
    for spec in &plan.folds {
        let train = select(&index, &spec.inner_train)?;
        let validation = select(&index, &spec.inner_validation)?;
        let test = select(&index, &spec.outer_test)?;
        outputs.push(match arm {
            DetectorArm::Spm(cfg) => spm_fold(spec.fold, &train, &validation, &test, cfg, seed)?,
            DetectorArm::External(p) => external_fold(spec.fold, &test, p)?,
        });
    }

    let folds: Vec<FoldResult> = outputs.iter().map(|o| o.result.clone()).collect();
    let confusion = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.merged(&f.confusion));

    let mut totals = [0u64; 5];
    let mut flagged = [0u64; 5];
    let mut class_confusion = ClassConfusion::default();
    for (actual, predicted, class) in outputs.iter().flat_map(|o| &o.outcomes) {
        let a = usize::from(actual.value());
        totals[a] += 1;
        flagged[a] += u64::from(*predicted);
        if let Some(c) = class {
            class_confusion.record(*actual, *c);
        }
    }
    let per_class = OutlierLabel::ALL
        .iter()
        .map(|l| {
            let i = usize::from(l.value());
            ClassDetection {
                label: l.value(),
                name: l.name().to_string(),
                total: totals[i],
                flagged: flagged[i],
                rate: if totals[i] == 0 { 0.0 } else { flagged[i] as f64 / totals[i] as f64 },
            }
        })
        .collect();

    let (arm_name, class_confusion) = match arm {
        DetectorArm::Spm(_) => ("spm", None),
        DetectorArm::External(_) => ("external", Some(class_confusion)),
    };
    let mccs: Vec<f64> = folds.iter().map(|f| f.mcc).collect();
    let f1s: Vec<f64> = folds.iter().map(|f| f.f1).collect();
    let report = MetricReport {
        arm: arm_name.to_string(),
        seed,
        mcc: Summary::of(&mccs),
        f1: Summary::of(&f1s),
        folds,
        confusion,
        per_class,
        class_confusion,
    };
    let decisions = outputs.into_iter().flat_map(|o| o.decisions).collect();
    Ok(CvOutcome { report, decisions })
}
