use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finetune, FinetuneOutcome, TrainConfig};
use crate::decoder::LossToggles;
use crate::encoder::PreparedGraph;
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::model::Model;
use crate::rng;

const FOLD_STREAM: u64 = 0x4356_0001;

/// Disjoint index sets of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks that the three parts are disjoint and inside `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("index {i} appears twice in the split")));
            }
        }
        Ok(())
    }
}

/// Per-fold test accuracies with their mean and population standard
/// deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl FoldResult {
    pub fn from_accuracies(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len().max(1) as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / n;
        let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        FoldResult {
            fold_accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Fold id of every graph. Each class is shuffled and dealt round-robin
/// over the folds, continuing where the previous class stopped, so fold
/// sizes differ by at most one. When some class has fewer than `k` members
/// the whole index set is shuffled and dealt instead, with a warning.
pub fn fold_assignment(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 folds (test, validation, training), got {k}"
        )));
    }
    if labels.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} graphs cannot fill {k} folds",
            labels.len()
        )));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members.retain(|m| !m.is_empty());
    let mut r = rng::stream(seed, FOLD_STREAM);
    if members.iter().any(|m| m.len() < k) {
        log::warn!("a class has fewer than {k} graphs; using unstratified folds");
        members = vec![(0..labels.len()).collect()];
    }
    let mut assign = vec![0; labels.len()];
    let mut next = 0;
    for m in &mut members {
        m.shuffle(&mut r);
        for &i in m.iter() {
            assign[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(assign)
}

/// Fold `i` tests, fold `i + 1 (mod k)` validates, the rest trains.
pub fn fold_splits(assign: &[usize], k: usize) -> Vec<Split> {
    (0..k)
        .map(|i| {
            let mut s = Split::default();
            for (g, &f) in assign.iter().enumerate() {
                if f == i {
                    s.test.push(g);
                } else if f == (i + 1) % k {
                    s.val.push(g);
                } else {
                    s.train.push(g);
                }
            }
            s
        })
        .collect()
}

/// Runs `score` on every fold in parallel and aggregates the accuracies.
pub fn cross_validate_with<T: Send>(
    labels: &[usize],
    k: usize,
    seed: u64,
    score: impl Fn(usize, &Split) -> Result<(f64, T)> + Sync,
) -> Result<(FoldResult, Vec<T>)> {
    let splits = fold_splits(&fold_assignment(labels, k, seed)?, k);
    let results: Vec<(f64, T)> = splits
        .par_iter()
        .enumerate()
        .map(|(i, s)| score(i, s))
        .collect::<Result<_>>()?;
    let (acc, extra) = results.into_iter().unzip();
    Ok((FoldResult::from_accuracies(acc), extra))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub result: FoldResult,
    pub folds: Vec<FinetuneOutcome>,
}

/// k-fold fine-tuning of dataset `name`. Every fold starts from its own
/// copy of `template`, which must have the dataset registered (freshly
/// initialized or on top of a pretrained encoder).
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    template: &Model,
    name: &str,
    prepared: &[PreparedGraph],
    labels: &[usize],
    kernels: Option<&KernelSet>,
    k: usize,
    cfg: &TrainConfig,
    on_epoch: impl Fn(&super::EpochRecord) + Sync,
) -> Result<CvReport> {
    let (result, folds) = cross_validate_with(labels, k, cfg.seed, |i, split| {
        let mut model = template.clone();
        let out = finetune(
            &mut model,
            name,
            prepared,
            labels,
            kernels,
            split,
            Some(i),
            cfg,
            &on_epoch,
        )?;
        log::info!(
            "{name} fold {i}: test accuracy {:.4} after {} epochs",
            out.test_accuracy,
            out.epochs_run
        );
        Ok((out.test_accuracy, out))
    })?;
    Ok(CvReport { result, folds })
}

/// Named loss configurations for the ablation study: the full objective,
/// each loss removed in turn, and the full objective plus the adaptive
/// kernel loss.
pub fn ablation_variants() -> Vec<(&'static str, LossToggles)> {
    let full = LossToggles {
        adjacency: true,
        kernel_unsup: true,
        adaptive: false,
        class: true,
    };
    vec![
        ("full", full),
        (
            "no_adjacency",
            LossToggles {
                adjacency: false,
                ..full
            },
        ),
        (
            "no_kernel_unsup",
            LossToggles {
                kernel_unsup: false,
                ..full
            },
        ),
        ("no_class", LossToggles { class: false, ..full }),
        ("with_adaptive", LossToggles { adaptive: true, ..full }),
    ]
}

/// Fine-tunes a copy of `template` on one fixed split per loss variant.
#[allow(clippy::too_many_arguments)]
pub fn ablation(
    template: &Model,
    name: &str,
    prepared: &[PreparedGraph],
    labels: &[usize],
    kernels: Option<&KernelSet>,
    split: &Split,
    cfg: &TrainConfig,
    variants: &[(&str, LossToggles)],
) -> Result<Vec<(String, FinetuneOutcome)>> {
    variants
        .par_iter()
        .map(|&(variant, toggles)| {
            let cfg = TrainConfig {
                finetune_losses: toggles,
                ..cfg.clone()
            };
            let mut model = template.clone();
            let out = finetune(&mut model, name, prepared, labels, kernels, split, None, &cfg, |_| {})?;
            log::info!("ablation {variant}: test accuracy {:.4}", out.test_accuracy);
            Ok((variant.to_string(), out))
        })
        .collect()
}
