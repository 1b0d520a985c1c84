//! Group-confined, label-stratified partitions.
//!
//! Groups (subjects) are placed greedily, largest first with a seeded
//! shuffle among equal sizes, into the bin where they least increase the
//! squared deviation of per-label counts from each bin's ideal share.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::sample::Sample;

const N_LABELS: usize = 5;

/// Label and group of every sample, the only inputs the splitters need.
#[derive(Clone, Debug)]
pub struct GroupedLabels {
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
}

impl GroupedLabels {
    pub fn from_samples(samples: &[Sample]) -> Self {
        GroupedLabels {
            labels: samples.iter().map(|s| s.label.value()).collect(),
            groups: samples.iter().map(|s| s.subject_id.clone()).collect(),
        }
    }
}

struct Group {
    members: Vec<usize>,
    counts: [usize; N_LABELS],
}

/// Groups among `indices`, in order of first appearance.
fn collect_groups(data: &GroupedLabels, indices: &[usize]) -> Result<Vec<Group>> {
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for &i in indices {
        let label = usize::from(data.labels[i]);
        if label >= N_LABELS {
            return Err(Error::Validation(format!("label {label} outside 0..=4")));
        }
        let g = *slot.entry(data.groups[i].as_str()).or_insert_with(|| {
            groups.push(Group { members: Vec::new(), counts: [0; N_LABELS] });
            groups.len() - 1
        });
        groups[g].members.push(i);
        groups[g].counts[label] += 1;
    }
    Ok(groups)
}

/// Assigns each group to a bin whose target share is `targets[b]`.
fn assign_groups(groups: &[Group], targets: &[f64], seed: u64, tag: &str) -> Vec<usize> {
    let n_bins = targets.len();
    let mut total = [0usize; N_LABELS];
    for g in groups {
        for (t, c) in total.iter_mut().zip(g.counts) {
            *t += c;
        }
    }
    let n_samples: usize = total.iter().sum();

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut stream(seed, tag, &[]));
    order.sort_by_key(|&g| std::cmp::Reverse(groups[g].members.len()));

    let mut counts = vec![[0usize; N_LABELS]; n_bins];
    let mut sizes = vec![0usize; n_bins];
    let mut assignment = vec![usize::MAX; groups.len()];
    for (placed, &g) in order.iter().enumerate() {
        let remaining = groups.len() - placed;
        let empty: Vec<usize> = (0..n_bins).filter(|&b| sizes[b] == 0).collect();
        // keep every bin non-empty when groups run out
        let candidates: Vec<usize> = if remaining <= empty.len() { empty } else { (0..n_bins).collect() };
        let gc = groups[g].counts;
        let cost = |b: usize| -> f64 {
            (0..N_LABELS)
                .map(|l| {
                    let ideal = total[l] as f64 * targets[b];
                    let dev = counts[b][l] as f64 - ideal;
                    let add = gc[l] as f64;
                    add * (2.0 * dev + add)
                })
                .sum()
        };
        let fill = |b: usize| sizes[b] as f64 / (targets[b] * n_samples as f64).max(1e-12);
        let best = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| {
                cost(a)
                    .total_cmp(&cost(b))
                    .then(fill(a).total_cmp(&fill(b)))
                    .then(a.cmp(&b))
            })
            .expect("at least one bin");
        assignment[g] = best;
        sizes[best] += groups[g].members.len();
        for (c, add) in counts[best].iter_mut().zip(gc) {
            *c += add;
        }
    }
    assignment
}

/// Outer fold index of every sample.
pub fn stratified_group_kfold(data: &GroupedLabels, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    let all: Vec<usize> = (0..data.labels.len()).collect();
    let groups = collect_groups(data, &all)?;
    if groups.len() < k {
        return Err(Error::Precondition(format!(
            "{} subject groups cannot fill {k} folds",
            groups.len()
        )));
    }
    let assignment = assign_groups(&groups, &vec![1.0 / k as f64; k], seed, "outer-folds");
    let mut fold_of = vec![0; data.labels.len()];
    for (g, &bin) in groups.iter().zip(&assignment) {
        for &i in &g.members {
            fold_of[i] = bin;
        }
    }
    Ok(fold_of)
}

/// Group-level stratified split of `indices` into `(train, validation)`,
/// `ratio` being the train share. Both outputs are sorted.
pub fn inner_split(data: &GroupedLabels, indices: &[usize], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Validation(format!("split ratio {ratio} not in (0, 1)")));
    }
    let groups = collect_groups(data, indices)?;
    if groups.len() < 2 {
        return Err(Error::Precondition("inner split needs at least 2 subject groups".into()));
    }
    let assignment = assign_groups(&groups, &[ratio, 1.0 - ratio], seed, "inner-split");
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (g, &bin) in groups.iter().zip(&assignment) {
        if bin == 0 {
            train.extend(&g.members);
        } else {
            val.extend(&g.members);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold: usize,
    pub inner_train: Vec<String>,
    pub inner_validation: Vec<String>,
    pub outer_test: Vec<String>,
}

/// Sample ids per role per outer fold, shared by both detector arms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<FoldSpec>,
}

impl FoldPlan {
    /// Outer `k`-fold partition plus an 80/20 inner split of each training part.
    pub fn build(samples: &[Sample], k: usize, inner_ratio: f64, seed: u64) -> Result<Self> {
        let data = GroupedLabels::from_samples(samples);
        let fold_of = stratified_group_kfold(&data, k, seed)?;
        let ids = |idx: &[usize]| idx.iter().map(|&i| samples[i].id.clone()).collect::<Vec<_>>();
        let folds = (0..k)
            .map(|f| {
                let test: Vec<usize> = (0..samples.len()).filter(|&i| fold_of[i] == f).collect();
                let rest: Vec<usize> = (0..samples.len()).filter(|&i| fold_of[i] != f).collect();
                let inner_seed = crate::rng::derive_key(seed, "inner", &[f as u64]);
                let (train, val) = inner_split(&data, &rest, inner_ratio, inner_seed)?;
                Ok(FoldSpec {
                    fold: f,
                    inner_train: ids(&train),
                    inner_validation: ids(&val),
                    outer_test: ids(&test),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let plan = FoldPlan { seed, folds };
        plan.validate(samples)?;
        Ok(plan)
    }

    /// Checks coverage, disjointness and subject confinement against `samples`.
    pub fn validate(&self, samples: &[Sample]) -> Result<()> {
        let subject: BTreeMap<&str, &str> = samples.iter().map(|s| (s.id.as_str(), s.subject_id.as_str())).collect();
        let mut tested = HashSet::new();
        for f in &self.folds {
            let roles = [&f.inner_train, &f.inner_validation, &f.outer_test];
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            let mut group_role: BTreeMap<&str, usize> = BTreeMap::new();
            for (r, ids) in roles.iter().enumerate() {
                for id in ids.iter() {
                    let sid = subject
                        .get(id.as_str())
                        .ok_or_else(|| Error::Validation(format!("fold {}: unknown sample id {id}", f.fold)))?;
                    if seen.insert(id, r).is_some() {
                        return Err(Error::Validation(format!("fold {}: id {id} appears twice", f.fold)));
                    }
                    if let Some(prev) = group_role.insert(sid, r) {
                        if prev != r {
                            return Err(Error::Validation(format!(
                                "fold {}: subject {sid} spans two partitions",
                                f.fold
                            )));
                        }
                    }
                }
            }
            if seen.len() != samples.len() {
                return Err(Error::Validation(format!(
                    "fold {} covers {} of {} samples",
                    f.fold,
                    seen.len(),
                    samples.len()
                )));
            }
            for id in &f.outer_test {
                if !tested.insert(id.as_str()) {
                    return Err(Error::Validation(format!("id {id} is in two outer test partitions")));
                }
            }
        }
        if tested.len() != samples.len() {
            return Err(Error::Validation("outer test partitions do not cover the dataset".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))
    }
}
