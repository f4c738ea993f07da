//! Reconstruction, kernel and classification losses.
//!
//! Every loss is a mean over its entries, so the weights in
//! [`LossWeights`] do not depend on batch or graph size.

use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_rows, Tape, Var};
use crate::encoder::{Batch, EncoderOutput, Mlp};
use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::matrix::Matrix;
use crate::params::Session;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub adjacency: f64,
    /// Weight of the kernel block (unsupervised and adaptive).
    pub kernel: f64,
    /// Per-kernel weights in kernel order; empty means `1/K` each.
    pub per_kernel: Vec<f64>,
    pub class: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            adjacency: 1.0,
            kernel: 1.0,
            per_kernel: Vec::new(),
            class: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.adjacency, self.kernel, self.class]
            .into_iter()
            .chain(self.per_kernel.iter().copied());
        for w in all {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "loss weight {w} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Per-kernel weights for `k` kernels.
    pub fn kernel_weights(&self, k: usize) -> Result<Vec<f64>> {
        if self.per_kernel.is_empty() {
            return Ok(vec![1.0 / k.max(1) as f64; k]);
        }
        if self.per_kernel.len() != k {
            return Err(Error::InvalidArgument(format!(
                "{} per-kernel weights for {k} kernels",
                self.per_kernel.len()
            )));
        }
        Ok(self.per_kernel.clone())
    }
}

/// Which losses enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossToggles {
    pub adjacency: bool,
    pub kernel_unsup: bool,
    pub adaptive: bool,
    pub class: bool,
}

impl LossToggles {
    /// Adjacency reconstruction and the unsupervised kernel loss.
    pub const PRETRAIN: LossToggles = LossToggles {
        adjacency: true,
        kernel_unsup: true,
        adaptive: false,
        class: false,
    };

    /// Classification and the adaptive kernel loss.
    pub const FINETUNE: LossToggles = LossToggles {
        adjacency: false,
        kernel_unsup: false,
        adaptive: true,
        class: true,
    };

    pub fn needs_labels(&self) -> bool {
        self.adaptive || self.class
    }

    pub fn needs_kernels(&self) -> bool {
        self.adaptive || self.kernel_unsup
    }
}

impl Default for LossToggles {
    fn default() -> Self {
        LossToggles::FINETUNE
    }
}

/// `λ_A` times the mean over graphs of the mean binary cross-entropy
/// between `sigmoid(Y_g Y_gᵀ)` and the adjacency matrix, over all `n²`
/// entries including the diagonal (target 0).
pub fn adjacency_loss(tape: &mut Tape, y: Var, offsets: &[usize], adjacency: &[Matrix], lambda: f64) -> Result<Var> {
    if offsets.len() != adjacency.len() + 1 || adjacency.is_empty() {
        return Err(Error::shape("adjacency_loss", &[offsets.len()], &[adjacency.len()]));
    }
    let mut total = None;
    for (g, a) in adjacency.iter().enumerate() {
        let yg = tape.slice_rows(y, offsets[g], offsets[g + 1])?;
        let ygt = tape.transpose(yg);
        let logits = tape.matmul(yg, ygt)?;
        let l = tape.bce_with_logits(logits, a)?;
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    let mean = tape.scalar_mul(total.expect("non-empty"), 1.0 / adjacency.len() as f64);
    Ok(tape.scalar_mul(mean, lambda))
}

/// `λ_K Σ_k λ_k · mean_{i,j} (sigmoid(z_iᵀ W_k z_j) − K^(k)_ij)²` over all
/// ordered pairs of the batch.
pub fn kernel_loss_unsup(
    tape: &mut Tape,
    z: Var,
    heads: &[Var],
    slices: &[Matrix],
    lambda_k: &[f64],
    lambda_kernel: f64,
) -> Result<Var> {
    if heads.len() != slices.len() || heads.len() != lambda_k.len() || heads.is_empty() {
        return Err(Error::shape(
            "kernel_loss_unsup",
            &[heads.len(), lambda_k.len()],
            &[slices.len()],
        ));
    }
    let mut total = None;
    for ((&w, k), &lam) in heads.iter().zip(slices).zip(lambda_k) {
        let l = pairwise_mse(tape, z, w, k)?;
        let l = tape.scalar_mul(l, lam);
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    Ok(tape.scalar_mul(total.expect("non-empty"), lambda_kernel))
}

fn pairwise_mse(tape: &mut Tape, z: Var, w: Var, target: &Matrix) -> Result<Var> {
    let b = tape.shape(z)[0];
    if target.shape() != [b, b] {
        return Err(Error::shape("kernel slice", &target.shape(), &[b, b]));
    }
    let s = tape.bilinear(z, w, z)?;
    let p = tape.sigmoid(s);
    tape.mse(p, target)
}

/// Per-pair target: the largest kernel value for same-label pairs and the
/// smallest for different-label pairs.
pub fn adaptive_targets(slices: &[Matrix], labels: &[usize]) -> Result<Matrix> {
    let b = labels.len();
    let Some(first) = slices.first() else {
        return Err(Error::InvalidArgument("adaptive loss needs at least one kernel".into()));
    };
    for s in slices {
        if s.shape() != [b, b] {
            return Err(Error::shape("adaptive_targets", &s.shape(), &[b, b]));
        }
    }
    Ok(Matrix::from_fn(b, b, |i, j| {
        let vals = slices.iter().map(|s| s[(i, j)]);
        if labels[i] == labels[j] {
            vals.fold(first[(i, j)], f64::max)
        } else {
            vals.fold(first[(i, j)], f64::min)
        }
    }))
}

/// `λ_K · mean_{i,j} (sigmoid(z_iᵀ W z_j) − target_ij)²` with targets from
/// [`adaptive_targets`].
pub fn kernel_loss_adaptive(
    tape: &mut Tape,
    z: Var,
    w_adapt: Var,
    slices: &[Matrix],
    labels: Option<&[usize]>,
    lambda_kernel: f64,
) -> Result<Var> {
    let labels = labels.ok_or_else(|| Error::MissingLabels("adaptive kernel loss".into()))?;
    let target = adaptive_targets(slices, labels)?;
    let l = pairwise_mse(tape, z, w_adapt, &target)?;
    Ok(tape.scalar_mul(l, lambda_kernel))
}

/// Class logits from graph embeddings.
pub fn classify(s: &mut Session, head: &Mlp, z: Var, dropout: f64) -> Result<Var> {
    head.forward(s, z, dropout)
}

/// Row-wise class probabilities.
pub fn probabilities(logits: &Matrix) -> Matrix {
    softmax_rows(logits)
}

pub fn kernel_head_name(kind: KernelKind) -> String {
    format!("kernel.{}.w", kind.name())
}

pub const ADAPTIVE_HEAD: &str = "kernel.adaptive.w";

/// Everything the losses read besides parameters.
pub struct LossInputs<'a> {
    pub out: EncoderOutput,
    pub batch: &'a Batch,
    /// One `B × B` slice per kernel in `kinds` order.
    pub slices: &'a [Matrix],
    pub kinds: &'a [KernelKind],
    pub head: Option<&'a Mlp>,
    pub dropout: f64,
}

/// Total loss and the weighted value of each enabled component.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: Var,
    pub components: Vec<(&'static str, f64)>,
    /// Class logits when the classification loss ran.
    pub logits: Option<Var>,
}

impl LossBreakdown {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

/// Weighted sum of the enabled losses.
pub fn total_loss(
    s: &mut Session,
    inputs: &LossInputs,
    weights: &LossWeights,
    toggles: &LossToggles,
) -> Result<LossBreakdown> {
    let batch = inputs.batch;
    let labels = batch.labels.as_deref();
    if toggles.needs_labels() && labels.is_none() {
        return Err(Error::MissingLabels("supervised losses need graph labels".into()));
    }
    let mut parts: Vec<(&'static str, Var)> = Vec::new();
    let mut logits = None;
    if toggles.adjacency {
        let l = adjacency_loss(
            s.tape,
            inputs.out.y,
            &batch.offsets,
            &batch.adjacency,
            weights.adjacency,
        )?;
        parts.push(("adjacency", l));
    }
    if toggles.kernel_unsup {
        let heads = inputs
            .kinds
            .iter()
            .map(|&k| s.param(&kernel_head_name(k)))
            .collect::<Result<Vec<_>>>()?;
        let lam = weights.kernel_weights(inputs.kinds.len())?;
        let l = kernel_loss_unsup(s.tape, inputs.out.z, &heads, inputs.slices, &lam, weights.kernel)?;
        parts.push(("kernel_unsup", l));
    }
    if toggles.adaptive {
        let w = s.param(ADAPTIVE_HEAD)?;
        let l = kernel_loss_adaptive(s.tape, inputs.out.z, w, inputs.slices, labels, weights.kernel)?;
        parts.push(("adaptive", l));
    }
    if toggles.class {
        let head = inputs
            .head
            .ok_or_else(|| Error::InvalidArgument("classification loss needs a head".into()))?;
        let lg = classify(s, head, inputs.out.z, inputs.dropout)?;
        let ce = s.tape.softmax_cross_entropy(lg, labels.expect("checked"))?;
        parts.push(("class", s.tape.scalar_mul(ce, weights.class)));
        logits = Some(lg);
    }
    let mut total = s.tape.constant(Matrix::zeros(1, 1));
    for &(_, v) in &parts {
        total = s.tape.add(total, v)?;
    }
    let components = parts.iter().map(|&(n, v)| (n, s.tape.value(v).scalar())).collect();
    Ok(LossBreakdown {
        total,
        components,
        logits,
    })
}
