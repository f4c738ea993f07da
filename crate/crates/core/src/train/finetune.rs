use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{count_correct, lr_at, plan_batches, run_batch, training_batch, Adam, EpochRecord, Split, TrainConfig};
use crate::encoder::{Batch, PreparedGraph};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::model::Model;
use crate::rng;

const SHUFFLE_STREAM: u64 = 0x4654_0001;
const TAPE_STREAM: u64 = 0x4654_0002;
const REDRAW_STREAM: u64 = 0x4654_0003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneOutcome {
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Smoothed validation loss of the kept parameters.
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub history: Vec<EpochRecord>,
}

/// Mean loss and accuracy of `indices` in evaluation mode.
fn evaluate(
    model: &mut Model,
    name: &str,
    prepared: &[PreparedGraph],
    labels: &[usize],
    kernels: Option<&KernelSet>,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    // Same batch size as training keeps every kernel slice within B × B.
    for chunk in indices.chunks(cfg.batch_size) {
        let batch = Batch::new(prepared, chunk, Some(labels))?;
        let pass = run_batch(model, name, &batch, kernels, cfg, &cfg.finetune_losses, false, cfg.seed)?;
        loss += pass.total * chunk.len() as f64;
        let logits = pass.logits.expect("evaluation computes logits");
        correct += count_correct(&logits, batch.labels.as_deref().expect("labelled"));
    }
    let n = indices.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Fine-tunes `model` on the training part of `split` with
/// `cfg.finetune_losses`, stopping once the smoothed validation loss has
/// not improved for more than `cfg.patience` epochs. The parameters of the
/// best epoch are restored into `model` before the test set is scored.
#[allow(clippy::too_many_arguments)]
pub fn finetune(
    model: &mut Model,
    name: &str,
    prepared: &[PreparedGraph],
    labels: &[usize],
    kernels: Option<&KernelSet>,
    split: &Split,
    fold: Option<usize>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    split.validate(prepared.len())?;
    if labels.len() != prepared.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} graphs",
            labels.len(),
            prepared.len()
        )));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InvalidArgument("training and test sets must be nonempty".into()));
    }
    if split.val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let toggles = cfg.finetune_losses;
    if toggles.needs_kernels() {
        super::kernel_slices(kernels, &model.kinds, &[0], name)?;
    }

    let fold_id = fold.map_or(u64::MAX, |f| f as u64);
    let mut adam = Adam::new();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(cfg.smoothing);
    let mut best: Option<(usize, f64, crate::params::ParamStore)> = None;
    let mut since_improve = 0;
    let mut history = Vec::new();

    for epoch in 0..cfg.epochs() {
        let plan = plan_batches(
            &split.train,
            cfg.batch_size,
            rng::derive(cfg.seed, &[SHUFFLE_STREAM, fold_id, epoch as u64]),
        );
        let steps = plan.len();
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut seen = 0;
        let mut components: BTreeMap<String, f64> = BTreeMap::new();
        let mut lr = 0.0;
        let redraw = cfg
            .redraw_features
            .then(|| rng::derive(cfg.seed, &[REDRAW_STREAM, fold_id, epoch as u64]));
        for (step, indices) in plan.iter().enumerate() {
            lr = lr_at(epoch as f64 + step as f64 / steps as f64, cfg)?;
            let batch = training_batch(prepared, indices, Some(labels), redraw)?;
            let seed = rng::derive(cfg.seed, &[TAPE_STREAM, fold_id, epoch as u64, step as u64]);
            let pass = run_batch(model, name, &batch, kernels, cfg, &toggles, true, seed)?;
            adam.step(
                &mut model.params,
                pass.grads.as_ref().expect("train pass"),
                lr,
                cfg.weight_decay,
            )?;
            loss_sum += pass.total;
            for (c, v) in pass.components {
                *components.entry(c.to_string()).or_default() += v;
            }
            if let Some(l) = &pass.logits {
                correct += count_correct(l, batch.labels.as_deref().expect("labelled"));
                seen += batch.len();
            }
        }
        for v in components.values_mut() {
            *v /= steps as f64;
        }

        let (val_loss, val_acc) = evaluate(model, name, prepared, labels, kernels, &split.val, cfg)?;
        if recent.len() == cfg.smoothing {
            recent.pop_front();
        }
        recent.push_back(val_loss);
        let smoothed = recent.iter().sum::<f64>() / recent.len() as f64;

        let record = EpochRecord {
            phase: "finetune".into(),
            fold,
            epoch,
            lr,
            loss: loss_sum / steps as f64,
            components,
            val_loss: Some(val_loss),
            val_loss_smoothed: Some(smoothed),
            val_accuracy: Some(val_acc),
            train_accuracy: (seen > 0).then(|| correct as f64 / seen as f64),
        };
        on_epoch(&record);
        history.push(record);

        if best.as_ref().is_none_or(|(_, b, _)| smoothed < *b) {
            best = Some((epoch, smoothed, model.params.clone()));
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve > cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_loss, params) = best.expect("at least one epoch runs");
    model.params = params;
    let (_, train_accuracy) = evaluate(model, name, prepared, labels, kernels, &split.train, cfg)?;
    let (_, val_accuracy) = evaluate(model, name, prepared, labels, kernels, &split.val, cfg)?;
    let (_, test_accuracy) = evaluate(model, name, prepared, labels, kernels, &split.test, cfg)?;
    Ok(FinetuneOutcome {
        best_epoch,
        best_val_loss,
        epochs_run: history.len(),
        train_accuracy,
        val_accuracy,
        test_accuracy,
        history,
    })
}
