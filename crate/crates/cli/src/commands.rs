use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pedqc_core::evaluation::{
    inner_split, read_predictions, run_nested_cv, ConfusionMatrix, DetectorArm, FoldPlan, GroupedLabels, SpmArmConfig,
};
use pedqc_core::io::{load_manifest, read_field, read_grid, read_stack, save_dataset, write_grid, write_stack};
use pedqc_core::phantom::{generate_cohort, PhantomConfig};
use pedqc_core::registration::RegistrationConfig;
use pedqc_core::render::render_panel;
use pedqc_core::rng::derive_key;
use pedqc_core::spm::{tune, DecisionRecord, Detector, NormativeModel, SideModels, SpmParams};
use pedqc_core::synth::augment_dataset;
use pedqc_core::{OutlierLabel, Sample, Side};

use crate::{
    ArmArg, Cli, Command, DetectArgs, EvaluateArgs, FoldsArgs, MetricsArgs, PhantomArgs, RenderArgs, SideArg, SpmArgs,
    SynthArgs, TemplateArgs, TuneArgs,
};

const INNER_RATIO: f64 = 0.8;

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Phantom(a) => phantom(a, seed),
        Command::Synth(a) => synth(a, seed),
        Command::Template(a) => template(a),
        Command::Tune(a) => tune_cmd(a, seed),
        Command::Detect(a) => detect(a, seed),
        Command::Folds(a) => folds(a, seed),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Render(a) => render(a),
        Command::Metrics(a) => metrics(a),
    }
}

/// Parameters written by `tune` and read by `detect`.
#[derive(Debug, Serialize, Deserialize)]
struct TunedParams {
    params: SpmParams,
    validation_f1: f64,
}

impl SpmArgs {
    fn apply(&self, mut p: SpmParams) -> Result<SpmParams> {
        if let Some(v) = self.alpha_forming {
            p.alpha_forming = v;
        }
        if let Some(v) = self.min_cluster {
            p.min_cluster = v;
        }
        if let Some(v) = self.permutations {
            p.n_permutations = v;
        }
        if let Some(v) = self.alpha_fwe {
            p.alpha_fwe = v;
        }
        if let Some(c) = &self.connectivity {
            p.connectivity = c.parse::<u8>()?.try_into()?;
        }
        p.validate()?;
        Ok(p)
    }
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::L => Side::Left,
            SideArg::R => Side::Right,
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn load(manifest: &Path) -> Result<Vec<Sample>> {
    let samples = load_manifest(manifest)?;
    log::info!("loaded {} samples from {}", samples.len(), manifest.display());
    Ok(samples)
}

fn phantom(a: PhantomArgs, seed: u64) -> Result<()> {
    let cfg = PhantomConfig {
        seed,
        n_subjects: a.n_subjects,
        scale_jitter: a.scale_jitter,
        angle_jitter: a.angle_jitter,
        intensity_jitter: a.intensity_jitter,
        shift_jitter: a.shift_jitter,
        asymmetry: a.asymmetry,
    };
    let samples = generate_cohort(&cfg)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    save_dataset(&samples, &a.out_dir)?;
    log::info!("wrote {} phantom samples to {}", samples.len(), a.out_dir.display());
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let samples = load(&a.manifest)?;
    let out = augment_dataset(&samples, a.target, derive_key(seed, "synth", &[]))?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    save_dataset(&out, &a.out_dir)?;
    log::info!("wrote {} samples ({} synthetic) to {}", out.len(), out.len() - samples.len(), a.out_dir.display());
    Ok(())
}

fn side_inliers(samples: &[Sample], side: Side) -> Vec<pedqc_core::PressureGrid> {
    samples
        .iter()
        .filter(|s| s.side == side && s.label == OutlierLabel::Valid)
        .map(|s| s.grid.clone())
        .collect()
}

fn template(a: TemplateArgs) -> Result<()> {
    let samples = load(&a.manifest)?;
    let side = Side::from(a.side);
    let grids = side_inliers(&samples, side);
    log::info!("building {side} template from {} inliers", grids.len());
    let model = NormativeModel::build(side, &grids, &RegistrationConfig::default())?;
    write_grid(&a.out, &model.template)?;
    if let Some(path) = &a.stack_out {
        write_stack(path, &model.registered_grids())?;
    }
    Ok(())
}

fn tune_cmd(a: TuneArgs, seed: u64) -> Result<()> {
    let samples = load(&a.manifest)?;
    let base = a.spm.apply(SpmParams::default())?;
    let data = GroupedLabels::from_samples(&samples);
    let all: Vec<usize> = (0..samples.len()).collect();
    let (train, val) = inner_split(&data, &all, a.train_fraction, derive_key(seed, "tune-split", &[]))?;
    let train_inliers: Vec<&Sample> = train.iter().map(|&i| &samples[i]).filter(|s| !s.label.is_outlier()).collect();
    let validation: Vec<&Sample> = val.iter().map(|&i| &samples[i]).collect();
    log::info!("tuning on {} inliers, {} validation samples", train_inliers.len(), validation.len());
    let result = tune(
        &train_inliers,
        &validation,
        &base,
        a.budget,
        derive_key(seed, "tune", &[]),
        &RegistrationConfig::default(),
    )?;
    log::info!(
        "best alpha_forming {:.4}, min_cluster {}, validation F1 {:.3}",
        result.best.alpha_forming,
        result.best.min_cluster,
        result.best_f1
    );
    write_json(&a.out, &TunedParams { params: result.best, validation_f1: result.best_f1 })
}

fn load_model(dir: &Path, side: Side) -> Result<NormativeModel> {
    let template = read_grid(&dir.join(format!("template_{side}.f32")))?;
    let stack = read_stack(&dir.join(format!("stack_{side}.f32")))?;
    Ok(NormativeModel::from_registered(side, template, stack)?)
}

fn detect(a: DetectArgs, seed: u64) -> Result<()> {
    let samples = load(&a.manifest)?;
    let base = match &a.params {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<TunedParams>(&text)
                .map_err(|e| pedqc_core::Error::DataFormat(format!("{}: {e}", path.display())))?
                .params
        }
        None => SpmParams::default(),
    };
    let params = a.spm.apply(base)?;
    let models = SideModels { left: load_model(&a.model_dir, Side::Left)?, right: load_model(&a.model_dir, Side::Right)? };
    let detector = Detector::calibrate(models, params, derive_key(seed, "detect-null", &[]), RegistrationConfig::default())?;
    log::info!(
        "thresholds L {} R {}; testing {} samples",
        detector.fwe_threshold(Side::Left),
        detector.fwe_threshold(Side::Right),
        samples.len()
    );
    let records: Vec<DecisionRecord> = samples
        .par_iter()
        .map(|s| DecisionRecord::new(&s.id, &detector.detect(s)))
        .collect();
    log::info!("{} of {} flagged", records.iter().filter(|r| r.is_outlier).count(), records.len());
    write_jsonl(&a.out, &records)
}

fn plan_for(samples: &[Sample], k: usize, seed: u64) -> Result<FoldPlan> {
    Ok(FoldPlan::build(samples, k, INNER_RATIO, derive_key(seed, "folds", &[]))?)
}

fn folds(a: FoldsArgs, seed: u64) -> Result<()> {
    let samples = load(&a.manifest)?;
    plan_for(&samples, a.folds, seed)?.save(&a.out)?;
    Ok(())
}

fn evaluate(a: EvaluateArgs, seed: u64) -> Result<()> {
    let samples = load(&a.manifest)?;
    let plan = match &a.plan {
        Some(path) => FoldPlan::load(path)?,
        None => plan_for(&samples, a.folds, seed)?,
    };
    if let Some(path) = &a.write_plan {
        plan.save(path)?;
    }
    let arm = match a.arm {
        ArmArg::Spm => DetectorArm::Spm(SpmArmConfig {
            base: a.spm.apply(SpmParams::default())?,
            budget: a.budget,
            registration: RegistrationConfig::default(),
        }),
        ArmArg::External => {
            let path = a.predictions.as_ref().ok_or_else(|| anyhow!("--predictions is required for --arm external"))?;
            DetectorArm::External(read_predictions(path)?)
        }
    };
    let outcome = run_nested_cv(&samples, &plan, &arm, derive_key(seed, "cv", &[]))?;
    let r = &outcome.report;
    log::info!(
        "MCC {:.3} ± {:.3} [{:.3}, {:.3}]; F1 {:.3} ± {:.3} [{:.3}, {:.3}]",
        r.mcc.mean,
        r.mcc.std,
        r.mcc.min,
        r.mcc.max,
        r.f1.mean,
        r.f1.std,
        r.f1.min,
        r.f1.max
    );
    write_json(&a.report, r)?;
    if let Some(path) = &a.decisions {
        write_jsonl(path, &outcome.decisions)?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let samples = load(&a.manifest)?;
    let by_id: BTreeMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let text = fs::read_to_string(&a.decisions).with_context(|| format!("reading {}", a.decisions.display()))?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            serde_json::from_str::<DecisionRecord>(l)
                .map_err(|e| pedqc_core::Error::DataFormat(format!("decisions line {}: {e}", n + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    records.par_iter().try_for_each(|rec| -> Result<()> {
        let sample = by_id
            .get(rec.id.as_str())
            .ok_or_else(|| pedqc_core::Error::DataFormat(format!("decision for unknown sample {}", rec.id)))?;
        let attribution = match &a.attributions_dir {
            Some(dir) => {
                let path = dir.join(format!("{}.attr.f32", rec.id));
                if path.exists() { Some(read_field(&path)?) } else { None }
            }
            None => None,
        };
        let img = render_panel(&sample.grid, &rec.to_decision(), attribution.as_deref());
        img.save_png(&a.out_dir.join(format!("{}.png", rec.id)))?;
        Ok(())
    })?;
    log::info!("rendered {} figures into {}", records.len(), a.out_dir.display());
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let c = ConfusionMatrix::new(a.tn, a.fp, a.fn_, a.tp);
    if c.total() == 0 {
        bail!(pedqc_core::Error::Validation("confusion matrix is empty".into()));
    }
    let mut out = std::io::stdout().lock();
    if a.json {
        serde_json::to_writer(&mut out, &serde_json::json!({ "mcc": c.mcc(), "f1": c.f1() }))?;
        writeln!(out)?;
    } else {
        writeln!(out, "MCC {:.3}", c.mcc())?;
        writeln!(out, "F1 {:.3}", c.f1())?;
    }
    Ok(())
}
