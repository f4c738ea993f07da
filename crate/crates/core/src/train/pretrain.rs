use std::collections::BTreeMap;

use super::{lr_at, plan_batches, run_batch, training_batch, Adam, EpochRecord, TrainConfig};
use crate::encoder::PreparedGraph;
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::model::Model;
use crate::rng;

const SHUFFLE_STREAM: u64 = 0x5052_0001;
const TAPE_STREAM: u64 = 0x5052_0002;
const REDRAW_STREAM: u64 = 0x5052_0003;

/// One dataset taking part in pretraining. It must already be registered
/// with the model.
#[derive(Debug, Clone, Copy)]
pub struct PretrainData<'a> {
    pub name: &'a str,
    pub prepared: &'a [PreparedGraph],
    pub kernels: Option<&'a KernelSet>,
    /// Graph labels; only read when the pretraining losses are supervised.
    pub labels: Option<&'a [usize]>,
}

/// Trains the shared encoder on every dataset together with
/// `cfg.pretrain_losses`. Each epoch shuffles every dataset into batches
/// and interleaves them round-robin, so each batch comes from one dataset
/// and only that dataset's input transform receives gradients from it.
///
/// Returns one record per epoch; `on_epoch` sees each as it is produced.
pub fn pretrain(
    model: &mut Model,
    data: &[PretrainData],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let toggles = cfg.pretrain_losses;
    if data.is_empty() {
        return Err(Error::InvalidArgument("pretraining needs at least one dataset".into()));
    }
    for d in data {
        if !model.datasets().contains_key(d.name) {
            return Err(Error::InvalidArgument(format!(
                "dataset `{}` is not registered",
                d.name
            )));
        }
        if d.prepared.is_empty() {
            return Err(Error::InvalidArgument(format!("dataset `{}` is empty", d.name)));
        }
        if toggles.needs_kernels() {
            // Fail before the first step rather than mid-epoch.
            super::kernel_slices(d.kernels, &model.kinds, &[0], d.name)?;
            if d.kernels.is_some_and(|k| k.dataset_size() != d.prepared.len()) {
                return Err(Error::InvalidArgument(format!(
                    "kernel cache of `{}` does not match the dataset size",
                    d.name
                )));
            }
        }
        if toggles.needs_labels() && d.labels.is_none() {
            return Err(Error::MissingLabels(format!("dataset `{}`", d.name)));
        }
    }

    let mut adam = Adam::new();
    let mut history = Vec::new();
    for epoch in 0..cfg.epochs() {
        let plans: Vec<Vec<Vec<usize>>> = data
            .iter()
            .enumerate()
            .map(|(d, ds)| {
                let all: Vec<usize> = (0..ds.prepared.len()).collect();
                plan_batches(
                    &all,
                    cfg.batch_size,
                    rng::derive(cfg.seed, &[SHUFFLE_STREAM, epoch as u64, d as u64]),
                )
            })
            .collect();
        let mut schedule = Vec::new();
        let rounds = plans.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..rounds {
            for (d, plan) in plans.iter().enumerate() {
                if let Some(b) = plan.get(r) {
                    schedule.push((d, b));
                }
            }
        }

        let steps = schedule.len();
        let mut loss_sum = 0.0;
        let mut components: BTreeMap<String, f64> = BTreeMap::new();
        let mut lr = 0.0;
        for (step, (d, indices)) in schedule.into_iter().enumerate() {
            let ds = &data[d];
            lr = lr_at(epoch as f64 + step as f64 / steps as f64, cfg)?;
            let redraw = cfg
                .redraw_features
                .then(|| rng::derive(cfg.seed, &[REDRAW_STREAM, epoch as u64, d as u64]));
            let batch = training_batch(ds.prepared, indices, ds.labels, redraw)?;
            let seed = rng::derive(cfg.seed, &[TAPE_STREAM, epoch as u64, step as u64]);
            let pass = run_batch(model, ds.name, &batch, ds.kernels, cfg, &toggles, true, seed)?;
            adam.step(
                &mut model.params,
                pass.grads.as_ref().expect("train pass"),
                lr,
                cfg.weight_decay,
            )?;
            loss_sum += pass.total;
            for (name, v) in pass.components {
                *components.entry(name.to_string()).or_default() += v;
            }
        }
        for v in components.values_mut() {
            *v /= steps as f64;
        }
        let record = EpochRecord {
            phase: "pretrain".into(),
            fold: None,
            epoch,
            lr,
            loss: loss_sum / steps as f64,
            components,
            val_loss: None,
            val_loss_smoothed: None,
            val_accuracy: None,
            train_accuracy: None,
        };
        log::debug!("pretrain epoch {epoch}: loss {:.6}", record.loss);
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}
