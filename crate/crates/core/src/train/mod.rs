//! Optimization, schedules, pretraining, fine-tuning and cross-validation.

mod cv;
mod finetune;
mod pretrain;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use cv::{
    ablation, ablation_variants, cross_validate, cross_validate_with, fold_assignment, fold_splits, CvReport,
    FoldResult, Split,
};
pub use finetune::{finetune, FinetuneOutcome};
pub use pretrain::{pretrain, PretrainData};

use crate::autodiff::Tape;
use crate::decoder::{total_loss, LossInputs, LossToggles, LossWeights};
use crate::encoder::{Batch, PreparedGraph};
use crate::error::{Error, Result};
use crate::kernels::{batch_slice, KernelKind, KernelSet};
use crate::matrix::Matrix;
use crate::model::Model;
use crate::params::{ParamStore, Session};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Length of the learning-rate schedule.
    pub max_epoch: usize,
    /// Stop after this many epochs even if the schedule runs longer.
    pub epoch_cap: Option<usize>,
    pub warmup_epochs: f64,
    pub lr_init: f64,
    pub lr_max: f64,
    pub lr_final: f64,
    pub batch_size: usize,
    /// L2 coefficient added to every gradient.
    pub weight_decay: f64,
    /// Epochs without improvement of the smoothed validation loss before
    /// fine-tuning stops.
    pub patience: usize,
    /// Window of the moving average over validation losses.
    pub smoothing: usize,
    pub seed: u64,
    /// Draw fresh Gaussian inputs for featureless graphs at every training
    /// epoch. Evaluation always uses the fixed seeded draw.
    pub redraw_features: bool,
    pub weights: LossWeights,
    pub pretrain_losses: LossToggles,
    pub finetune_losses: LossToggles,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epoch: 3000,
            epoch_cap: None,
            warmup_epochs: 2.0,
            lr_init: 1e-4,
            lr_max: 1e-3,
            lr_final: 1e-4,
            batch_size: 32,
            weight_decay: 5e-4,
            patience: 50,
            smoothing: 5,
            seed: 0,
            redraw_features: true,
            weights: LossWeights::default(),
            pretrain_losses: LossToggles::PRETRAIN,
            finetune_losses: LossToggles::FINETUNE,
        }
    }
}

impl TrainConfig {
    /// Epochs actually run.
    pub fn epochs(&self) -> usize {
        self.epoch_cap.map_or(self.max_epoch, |c| c.min(self.max_epoch))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, lr) in [
            ("lr_init", self.lr_init),
            ("lr_max", self.lr_max),
            ("lr_final", self.lr_final),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.warmup_epochs >= 0.0 && self.warmup_epochs < self.max_epoch as f64) {
            return bad(format!(
                "warmup_epochs {} must be in [0, max_epoch = {})",
                self.warmup_epochs, self.max_epoch
            ));
        }
        if self.epoch_cap == Some(0) {
            return bad("epoch_cap must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be >= 0".into());
        }
        if self.smoothing < 1 {
            return bad("smoothing must be >= 1".into());
        }
        self.weights.validate()
    }
}

/// Learning rate at a (fractional) epoch: linear from `lr_init` to `lr_max`
/// over the warmup, then a half cosine from `lr_max` down to `lr_final` at
/// `max_epoch`.
pub fn lr_at(epoch: f64, cfg: &TrainConfig) -> Result<f64> {
    let max = cfg.max_epoch as f64;
    if !(0.0..=max).contains(&epoch) {
        return Err(Error::InvalidArgument(format!("epoch {epoch} outside [0, {max}]")));
    }
    let w = cfg.warmup_epochs;
    if epoch < w {
        return Ok(cfg.lr_init + (cfg.lr_max - cfg.lr_init) * epoch / w);
    }
    let progress = if max > w { (epoch - w) / (max - w) } else { 1.0 };
    let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
    Ok(cfg.lr_final + (cfg.lr_max - cfg.lr_final) * cosine)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Matrix,
    v: Matrix,
    t: u64,
}

/// Adam with per-parameter step counts; parameters without a gradient in a
/// step are left untouched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Adam {
    state: BTreeMap<String, Moments>,
}

impl Adam {
    pub fn new() -> Self {
        Adam::default()
    }

    /// Steps taken so far by parameter `name`.
    pub fn steps(&self, name: &str) -> u64 {
        self.state.get(name).map_or(0, |s| s.t)
    }

    /// One update. `weight_decay · w` is added to each gradient first. All
    /// gradients are checked before anything changes.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &BTreeMap<String, Matrix>,
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        for (name, g) in grads {
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
            let w = params
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("gradient for unknown parameter `{name}`")))?;
            if w.shape() != g.shape() {
                return Err(Error::shape("adam", &w.shape(), &g.shape()));
            }
        }
        for (name, g) in grads {
            if !params.is_trainable(name) {
                continue;
            }
            let mut w = params.get(name).expect("checked").clone();
            let st = self.state.entry(name.clone()).or_insert_with(|| Moments {
                m: Matrix::zeros(w.rows(), w.cols()),
                v: Matrix::zeros(w.rows(), w.cols()),
                t: 0,
            });
            st.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(st.t as i32);
            let c2 = 1.0 - ADAM_BETA2.powi(st.t as i32);
            let (m, v) = (st.m.data_mut(), st.v.data_mut());
            for (k, wk) in w.data_mut().iter_mut().enumerate() {
                let gk = g.data()[k] + weight_decay * *wk;
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
                *wk -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
            params.set(name, w)?;
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold: Option<usize>,
    pub epoch: usize,
    pub lr: f64,
    /// Mean total training loss over the epoch's batches.
    pub loss: f64,
    /// Mean weighted loss components over the epoch's batches.
    pub components: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_loss_smoothed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_accuracy: Option<f64>,
}

/// Kernel slices for `indices` in `kinds` order.
pub(crate) fn kernel_slices(
    kernels: Option<&KernelSet>,
    kinds: &[KernelKind],
    indices: &[usize],
    dataset: &str,
) -> Result<Vec<Matrix>> {
    kinds
        .iter()
        .map(|&kind| {
            let k = kernels
                .and_then(|ks| ks.matrices.iter().find(|m| m.kind == kind))
                .ok_or_else(|| Error::MissingKernel {
                    dataset: dataset.to_string(),
                    kind: kind.name().to_string(),
                })?;
            batch_slice(k, indices)
        })
        .collect()
}

/// Result of one forward pass over a batch.
pub(crate) struct BatchPass {
    pub total: f64,
    pub components: Vec<(&'static str, f64)>,
    pub grads: Option<BTreeMap<String, Matrix>>,
    pub logits: Option<Matrix>,
}

/// Forward pass (and backward when `train`) of dataset `name`'s batch.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_batch(
    model: &mut Model,
    name: &str,
    batch: &Batch,
    kernels: Option<&KernelSet>,
    cfg: &TrainConfig,
    toggles: &LossToggles,
    train: bool,
    tape_seed: u64,
) -> Result<BatchPass> {
    let slices = if toggles.needs_kernels() {
        kernel_slices(kernels, &model.kinds, &batch.indices, name)?
    } else {
        Vec::new()
    };
    let input = model.input_mlp(name)?;
    let head = model.head(name)?;
    let mut tape = Tape::new(tape_seed);
    let mut s = Session::new(&mut tape, &mut model.params, train);
    let out = model.encoder.encode(&mut s, &input, batch)?;
    let inputs = LossInputs {
        out,
        batch,
        slices: &slices,
        kinds: &model.kinds,
        head: Some(&head),
        dropout: model.encoder.config.dropout,
    };
    let loss = total_loss(&mut s, &inputs, &cfg.weights, toggles)?;
    let logits = match loss.logits {
        Some(l) => Some(s.tape.value(l).clone()),
        None if !train => {
            let l = head.forward(&mut s, out.z, 0.0)?;
            Some(s.tape.value(l).clone())
        }
        None => None,
    };
    let total = s.tape.value(loss.total).scalar();
    let grads = if train { Some(s.gradients(loss.total)?) } else { None };
    Ok(BatchPass {
        total,
        components: loss.components,
        grads,
        logits,
    })
}

/// Number of rows whose largest logit sits at the label.
pub(crate) fn count_correct(logits: &Matrix, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(logits.row(i)) == l)
        .count()
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Shuffles `indices` with `seed` and cuts them into `ceil(n / size)`
/// batches whose sizes differ by at most one, so no batch exceeds `size`
/// and a lone trailing graph is avoided where possible.
/// Training batch of `indices`; with `redraw` set, generated inputs are
/// replaced by a draw seeded with it and each graph's position.
pub(crate) fn training_batch(
    prepared: &[PreparedGraph],
    indices: &[usize],
    labels: Option<&[usize]>,
    redraw: Option<u64>,
) -> Result<Batch> {
    let Some(seed) = redraw else {
        return Batch::new(prepared, indices, labels);
    };
    let mut parts = Vec::with_capacity(indices.len());
    for &i in indices {
        let p = prepared.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: prepared.len(),
        })?;
        parts.push(p.redraw(seed, i as u64)?);
    }
    Batch::from_parts(&parts.iter().collect::<Vec<_>>(), indices, labels)
}

pub fn plan_batches(indices: &[usize], size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order = indices.to_vec();
    order.shuffle(&mut rng::seeded(seed));
    let n = order.len();
    if n == 0 {
        return Vec::new();
    }
    let count = n.div_ceil(size.max(1));
    let (base, extra) = (n / count, n % count);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for b in 0..count {
        let len = base + usize::from(b < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}
