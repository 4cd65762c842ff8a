//! Masked event-to-image distillation loop and structure evaluation.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adamw::{AdamW, OptimizerState};
use super::checkpoint::{Checkpoint, StepRecord};
use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::events::{activation_mask, density_map, voxelize_with, ActivationMask, EventVolume};
use crate::features::{
    student_backward_batch, student_forward, student_forward_batch, teacher_forward, FeatureGrid,
    StudentParams, TeacherSpec,
};
use crate::losses::{combined_loss_with, intra_structure, masked_l1, LossReport, LossWeights, MaskedPair};
use crate::par::{self, Execution};
use crate::synth::{LabelMap, Manifest, SceneSample};

/// Model inputs derived once per sample before training.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    /// Student input: the voxel grid multiplied by `event_scale`.
    pub volume: EventVolume,
    pub mask: ActivationMask,
    pub teacher: FeatureGrid,
    pub labels: LabelMap,
}

impl TrainConfig {
    pub fn teacher_spec(&self) -> Result<TeacherSpec> {
        TeacherSpec::new(self.dim, self.teacher_seed, self.teacher_radius)
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_is: self.lambda_is,
            lambda_cs: self.lambda_cs,
        }
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps_adam,
            weight_decay: self.weight_decay,
        }
    }

    pub fn init_student(&self) -> Result<StudentParams> {
        StudentParams::init(self.patch, self.bins, self.hidden, self.dim, self.seed)
    }
}

/// Voxelizes the events, thresholds their density, scales the volume for
/// the student and runs the teacher on the frame at the start of the window.
pub fn prepare_sample(sample: &SceneSample, cfg: &TrainConfig, teacher: &TeacherSpec) -> Result<PreparedSample> {
    let (w, h) = (sample.events.width(), sample.events.height());
    if (w, h) != (cfg.width, cfg.height) || (sample.frame0.width, sample.frame0.height) != (w, h) {
        return Err(Error::Config(format!(
            "sample is {w}x{h} (frame {}x{}), config expects {}x{}",
            sample.frame0.width, sample.frame0.height, cfg.width, cfg.height
        )));
    }
    let volume = voxelize_with(&sample.events, cfg.bins, Execution::Sequential)?;
    let mask = activation_mask(&density_map(&volume, cfg.patch)?, cfg.tau)?;
    let teacher = teacher_forward(teacher, &sample.frame0, cfg.patch)?;
    Ok(PreparedSample {
        volume: volume.scaled(cfg.event_scale),
        mask,
        teacher,
        labels: sample.labels.clone(),
    })
}

pub fn prepare_samples(samples: &[SceneSample], cfg: &TrainConfig, exec: Execution) -> Result<Vec<PreparedSample>> {
    let teacher = cfg.teacher_spec()?;
    par::map(exec, samples, |s| prepare_sample(s, cfg, &teacher))
        .into_iter()
        .collect()
}

pub fn prepare_manifest(manifest: &Manifest, cfg: &TrainConfig, exec: Execution) -> Result<Vec<PreparedSample>> {
    let teacher = cfg.teacher_spec()?;
    par::map_range(exec, manifest.len(), |i| {
        prepare_sample(&manifest.load_sample(i)?, cfg, &teacher)
    })
    .into_iter()
    .collect()
}

fn make_pairs(
    params: &StudentParams,
    samples: &[&PreparedSample],
    exec: Execution,
) -> Result<(Vec<EventVolume>, Vec<MaskedPair>)> {
    let volumes: Vec<EventVolume> = samples.iter().map(|s| s.volume.clone()).collect();
    let ks = student_forward_batch(params, &volumes, exec)?;
    let pairs = ks
        .into_iter()
        .zip(samples)
        .map(|(k, s)| MaskedPair::new(k, s.teacher.clone(), s.mask.clone()))
        .collect::<Result<_>>()?;
    Ok((volumes, pairs))
}

/// Objective over all of `samples` as a single batch.
pub fn evaluate_objective(
    params: &StudentParams,
    samples: &[PreparedSample],
    weights: LossWeights,
    exec: Execution,
) -> Result<LossReport> {
    let refs: Vec<&PreparedSample> = samples.iter().collect();
    let (_, pairs) = make_pairs(params, &refs, exec)?;
    combined_loss_with(&pairs, weights, exec)
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Written after every epoch and at the end of training.
    pub checkpoint: Option<PathBuf>,
    pub exec: Execution,
    /// Starting parameters; defaults to a fresh initialization from `seed`.
    pub init: Option<StudentParams>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub initial: LossReport,
    pub final_report: LossReport,
}

impl TrainOutcome {
    pub fn params(&self) -> &StudentParams {
        &self.checkpoint.params
    }
}

fn total_steps(cfg: &TrainConfig, n: usize) -> u64 {
    cfg.steps
        .unwrap_or_else(|| cfg.epochs * n.div_ceil(cfg.batch_size) as u64)
}

fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn pretrain(samples: &[PreparedSample], cfg: &TrainConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    let exec = opts.exec;
    let weights = cfg.loss_weights();
    let adam = cfg.optimizer();
    let mut params = match &opts.init {
        Some(p) => {
            p.validate()?;
            p.clone()
        }
        None => cfg.init_student()?,
    };
    let mut state = OptimizerState::for_student(&params);
    let mut history = Vec::new();
    let initial = evaluate_objective(&params, samples, weights, exec)?;

    let steps = total_steps(cfg, samples.len());
    let mut step = 0u64;
    let mut epoch = 0u64;
    let snapshot = |params: &StudentParams, state: &OptimizerState, history: &Vec<StepRecord>| Checkpoint {
        params: params.clone(),
        config: cfg.clone(),
        optimizer: state.clone(),
        history: history.clone(),
    };
    while step < steps {
        let order = epoch_order(cfg.seed, epoch, samples.len());
        for chunk in order.chunks(cfg.batch_size) {
            if step == steps {
                break;
            }
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (volumes, pairs) = make_pairs(&params, &batch, exec)?;
            let report = combined_loss_with(&pairs, weights, exec)?;
            if !report.total.is_finite() {
                return Err(Error::Numeric(format!("loss is {} at step {step}", report.total)));
            }
            let grads = student_backward_batch(&params, &volumes, &report.grads, exec)?;
            adam.step_student(&mut params, &grads, &mut state)?;
            params
                .validate()
                .map_err(|_| Error::Numeric(format!("parameters diverged at step {step}")))?;
            history.push(StepRecord {
                l1: report.l1,
                intra: report.intra,
                cross: report.cross,
                total: report.total,
            });
            step += 1;
        }
        epoch += 1;
        if let Some(path) = &opts.checkpoint {
            snapshot(&params, &state, &history).save(path)?;
        }
    }

    let final_report = evaluate_objective(&params, samples, weights, exec)?;
    let checkpoint = snapshot(&params, &state, &history);
    if let Some(path) = &opts.checkpoint {
        checkpoint.save(path)?;
    }
    Ok(TrainOutcome {
        checkpoint,
        initial,
        final_report,
    })
}

/// Mean held-out disagreement between student and teacher on active tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureDiscrepancy {
    /// `‖K*K*ᵀ − Q*Q*ᵀ‖₁ / T²`
    pub gram_err: f64,
    /// `‖K* − Q*‖₁ / (T·D)`
    pub l1_err: f64,
}

/// Sums after sorting so the result does not depend on sample order.
fn order_free_mean(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Discrepancy of precomputed student grids against the prepared teacher grids.
pub fn structure_discrepancy(students: &[FeatureGrid], samples: &[PreparedSample]) -> Result<StructureDiscrepancy> {
    if students.len() != samples.len() {
        return Err(Error::Dimension(format!(
            "{} student grids for {} samples",
            students.len(),
            samples.len()
        )));
    }
    let mut grams = Vec::with_capacity(samples.len());
    let mut l1s = Vec::with_capacity(samples.len());
    for (k, s) in students.iter().zip(samples) {
        let pair = [MaskedPair::new(k.clone(), s.teacher.clone(), s.mask.clone())?];
        let t = k.tokens() as f64;
        grams.push(intra_structure(&pair)?.value / (t * t));
        l1s.push(masked_l1(&pair)?.value / (t * k.dim() as f64));
    }
    Ok(StructureDiscrepancy {
        gram_err: order_free_mean(grams),
        l1_err: order_free_mean(l1s),
    })
}

pub fn eval_structure_discrepancy(
    params: &StudentParams,
    samples: &[PreparedSample],
    exec: Execution,
) -> Result<StructureDiscrepancy> {
    let students: Vec<FeatureGrid> = par::map(exec, samples, |s| student_forward(params, &s.volume))
        .into_iter()
        .collect::<Result<_>>()?;
    structure_discrepancy(&students, samples)
}
