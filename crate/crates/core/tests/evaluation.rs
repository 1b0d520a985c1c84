use std::collections::{BTreeMap, BTreeSet};

use pedqc_core::evaluation::{
    binarize, f1, inner_split, mcc, stratified_group_kfold, BinaryClass, ConfusionMatrix, FoldPlan, GroupedLabels,
    Summary,
};
use pedqc_core::phantom::{generate_cohort, PhantomConfig};
use pedqc_core::synth::{augment_dataset, synthetic_deficit};
use pedqc_core::{OutlierLabel, Sample, Source};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_mcc(tn: f64, fp: f64, fn_: f64, tp: f64) -> f64 {
    let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if d == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / d.sqrt()
    }
}

fn naive_f1(fp: f64, fn_: f64, tp: f64) -> f64 {
    let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[test]
fn metrics_match_naive_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let v: [u64; 4] = std::array::from_fn(|_| if rng.gen_bool(0.1) { 0 } else { rng.gen_range(0..5000) });
        let c = ConfusionMatrix::new(v[0], v[1], v[2], v[3]);
        let [tn, fp, fn_, tp] = v.map(|x| x as f64);
        assert!((mcc(&c) - naive_mcc(tn, fp, fn_, tp)).abs() <= 1e-12, "{v:?}");
        assert!((f1(&c) - naive_f1(fp, fn_, tp)).abs() <= 1e-12, "{v:?}");
        assert!((-1.0..=1.0).contains(&mcc(&c)));
        assert!((0.0..=1.0).contains(&f1(&c)));
    }
}

#[test]
fn reported_aggregate_matrices() {
    let spm = ConfusionMatrix::new(754, 44, 237, 1763);
    assert!((spm.mcc() - 0.780).abs() <= 0.005);
    assert!((spm.f1() - 0.926).abs() <= 0.005);
    let ml = ConfusionMatrix::new(783, 15, 30, 1970);
    assert!((ml.mcc() - 0.961).abs() <= 0.005);
    assert!((ml.f1() - 0.989).abs() <= 0.005);
}

#[test]
fn binarize_is_total() {
    assert_eq!(binarize(OutlierLabel::Valid), BinaryClass::Inlier);
    for l in OutlierLabel::OUTLIERS {
        assert_eq!(binarize(l), BinaryClass::Outlier);
    }
}

#[test]
fn summary_bounds() {
    let s = Summary::of(&[0.7, 0.8, 0.75, 0.9, 0.6]);
    assert!(s.min <= s.mean && s.mean <= s.max);
    assert_eq!((s.min, s.max), (0.6, 0.9));
}

/// A labelled cohort with the class counts of the original study.
fn study_like_dataset() -> Vec<Sample> {
    let mut samples = generate_cohort(&PhantomConfig { seed: 31, n_subjects: 399, ..Default::default() }).unwrap();
    assert_eq!(samples.len(), 798);
    // real outliers: relabelled copies standing in for expert-annotated recordings
    let counts = [124, 29, 38, 42];
    let mut extra = Vec::new();
    for (label, n) in OutlierLabel::OUTLIERS.into_iter().zip(counts) {
        for (j, source) in samples.iter().take(n).enumerate() {
            let mut s = source.clone();
            s.id = format!("real{}-{j:03}", label.value());
            s.label = label;
            s.source = Source::Real;
            extra.push(s);
        }
    }
    samples.extend(extra);
    samples
}

#[test]
fn augmentation_reaches_class_targets() {
    let samples = study_like_dataset();
    assert_eq!(synthetic_deficit(&samples, 500), [376, 471, 462, 458]);
    let out = augment_dataset(&samples, 500, 77).unwrap();
    let mut per_class = BTreeMap::new();
    for s in &out {
        *per_class.entry(s.label.value()).or_insert(0usize) += 1;
    }
    assert_eq!(per_class.values().copied().collect::<Vec<_>>(), [798, 500, 500, 500, 500]);
    assert_eq!(out.len(), 2798);
    assert_eq!(&out[..samples.len()], samples.as_slice());
    assert!(out[samples.len()..].iter().all(|s| s.source == Source::Synthetic && s.label.is_outlier()));
    for s in &out {
        s.validate().unwrap();
    }
    assert_eq!(augment_dataset(&samples, 500, 77).unwrap(), out);
}

#[test]
fn augmentation_noop_and_errors() {
    let inliers = generate_cohort(&PhantomConfig { seed: 1, n_subjects: 3, ..Default::default() }).unwrap();
    assert_eq!(augment_dataset(&inliers, 0, 5).unwrap(), inliers);
    let mut outliers = inliers.clone();
    outliers.iter_mut().for_each(|s| s.label = OutlierLabel::InvertedOrientation);
    assert!(augment_dataset(&outliers, 10, 5).is_err());
}

fn random_grouped(rng: &mut ChaCha8Rng) -> GroupedLabels {
    let n_groups = rng.gen_range(5..150);
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for g in 0..n_groups {
        let size = rng.gen_range(1..=4);
        // groups are mostly homogeneous, like a subject's L/R pair plus synthetics
        let base: u8 = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..5) };
        for _ in 0..size {
            labels.push(if rng.gen_bool(0.8) { base } else { rng.gen_range(0..5) });
            groups.push(format!("g{g}"));
        }
    }
    GroupedLabels { labels, groups }
}

#[test]
fn fold_invariants_on_random_datasets() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..200 {
        let d = random_grouped(&mut rng);
        let folds = stratified_group_kfold(&d, 5, case).unwrap();
        assert_eq!(folds.len(), d.labels.len());
        let mut fold_of_group = BTreeMap::new();
        for (g, &f) in d.groups.iter().zip(&folds) {
            assert!(f < 5);
            assert_eq!(*fold_of_group.entry(g).or_insert(f), f, "case {case}: group {g} split");
        }
        let used: BTreeSet<usize> = folds.iter().copied().collect();
        assert_eq!(used.len(), 5, "case {case}: empty fold");
    }
}

#[test]
fn fold_plan_round_trips_and_validates() {
    let samples = study_like_dataset();
    let plan = FoldPlan::build(&samples, 5, 0.8, 3).unwrap();
    let json = plan.to_json().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("folds.json");
    plan.save(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), json);
    let back = FoldPlan::load(&path).unwrap();
    assert_eq!(back, plan);
    assert_eq!(FoldPlan::build(&samples, 5, 0.8, 3).unwrap().to_json().unwrap(), json);

    // moving one sample of a subject into another partition breaks confinement
    let mut broken = plan.clone();
    let moved = broken.folds[0].outer_test.pop().unwrap();
    broken.folds[0].inner_train.push(moved);
    assert!(broken.validate(&samples).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_split_respects_groups(seed in any::<u64>(), n_groups in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for g in 0..n_groups {
            for _ in 0..rng.gen_range(1..4) {
                labels.push(rng.gen_range(0..5u8));
                groups.push(format!("s{g}"));
            }
        }
        let d = GroupedLabels { labels, groups };
        let idx: Vec<usize> = (0..d.labels.len()).collect();
        let (train, val) = inner_split(&d, &idx, 0.8, seed).unwrap();
        prop_assert!(!train.is_empty() && !val.is_empty());
        prop_assert_eq!(train.len() + val.len(), idx.len());
        let tg: BTreeSet<&String> = train.iter().map(|&i| &d.groups[i]).collect();
        prop_assert!(val.iter().all(|&i| !tg.contains(&d.groups[i])));
    }
}
