//! Input transformation, moment convolution layers and sum pooling.
//!
//! Each dataset owns an input MLP mapping its features (after the input
//! filter) to the shared hidden width. The shared encoder then applies
//! `layers` capsule layers; layer `t` sees the concatenation of the
//! transformed input and every earlier layer's output, and computes
//!
//! ```text
//! F = MLP_outer( Σ_{p=1..P} MLP_p( G · H^{∘p} ) )
//! ```
//!
//! with `G = D^{-1/2} A D^{-1/2} + I` and `H^{∘p}` the elementwise power.
//! The graph embedding is the column sum of the last layer's rows.

pub mod batch;
pub mod mlp;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use batch::{prepare_dataset, prepare_graph, Batch, PreparedGraph};
pub use mlp::Mlp;

use crate::autodiff::{Axis, Var};
use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::params::{ParamStore, Session};

/// Filter applied to node features before the input MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFilter {
    /// Normalized Laplacian for generated Gaussian features, identity for
    /// features read from the dataset.
    #[default]
    Auto,
    Identity,
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub layers: usize,
    pub moments: u32,
    /// Linear layers per MLP; 0 makes every MLP the identity.
    pub mlp_depth: usize,
    /// Dropout rate inside the class head.
    pub dropout: f64,
    /// Dropout rate inside the input transform and capsule layers.
    pub encoder_dropout: f64,
    /// Width of generated Gaussian features for graphs without features.
    pub gaussian_dim: usize,
    pub input_filter: InputFilter,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 32,
            layers: 5,
            moments: 2,
            mlp_depth: 2,
            dropout: 0.5,
            encoder_dropout: 0.0,
            gaussian_dim: 16,
            input_filter: InputFilter::Auto,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden < 1 || self.layers < 1 || self.moments < 1 || self.gaussian_dim < 1 {
            return bad("hidden, layers, moments and gaussian_dim must be >= 1".into());
        }
        for (name, rate) in [("dropout", self.dropout), ("encoder_dropout", self.encoder_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return bad(format!("{name} {rate} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// One moment-convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleLayer {
    branches: Vec<Mlp>,
    outer: Mlp,
}

impl CapsuleLayer {
    pub fn new(prefix: &str, input: usize, cfg: &EncoderConfig) -> Result<Self> {
        let h = cfg.hidden;
        let branch_out = if cfg.mlp_depth == 0 { input } else { h };
        let branches = (1..=cfg.moments)
            .map(|p| Mlp::with_depth(format!("{prefix}.moment{p}"), input, h, branch_out, cfg.mlp_depth))
            .collect::<Result<_>>()?;
        let outer = Mlp::with_depth(format!("{prefix}.outer"), branch_out, h, branch_out, cfg.mlp_depth)?;
        Ok(CapsuleLayer { branches, outer })
    }

    pub fn input_dim(&self) -> usize {
        self.branches[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.outer.output_dim()
    }

    pub fn init(&self, store: &mut ParamStore, seed: u64) {
        for m in &self.branches {
            m.init(store, seed);
        }
        self.outer.init(store, seed);
    }

    pub fn forward(&self, s: &mut Session, x: Var, filter: &Arc<SparseMatrix>, dropout: f64) -> Result<Var> {
        let mut total = None;
        for (k, mlp) in self.branches.iter().enumerate() {
            let xp = s.tape.pow(x, k as u32 + 1)?;
            let conv = s.tape.sparse_matmul(filter, xp)?;
            let out = mlp.forward(s, conv, dropout)?;
            total = Some(match total {
                None => out,
                Some(t) => s.tape.add(t, out)?,
            });
        }
        self.outer.forward(s, total.expect("moments >= 1"), dropout)
    }
}

/// The shared part of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    layers: Vec<CapsuleLayer>,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderOutput {
    /// Transformed input, `N × h`.
    pub input: Var,
    /// Node outputs of the last layer.
    pub y: Var,
    /// Graph embeddings, one row per graph.
    pub z: Var,
}

impl Encoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers);
        let mut width = config.hidden;
        for t in 1..=config.layers {
            let layer = CapsuleLayer::new(&format!("encoder.layer{t}"), width, &config)?;
            width += layer.output_dim();
            layers.push(layer);
        }
        Ok(Encoder { config, layers })
    }

    pub fn layers(&self) -> &[CapsuleLayer] {
        &self.layers
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layers >= 1").output_dim()
    }

    pub fn init(&self, store: &mut ParamStore, seed: u64) {
        for l in &self.layers {
            l.init(store, seed);
        }
    }

    /// The input MLP of dataset `name` for feature width `input_dim`.
    /// Depth 0 is only possible when `input_dim` equals the hidden width;
    /// otherwise at least one linear layer is used.
    pub fn input_mlp(&self, name: &str, input_dim: usize) -> Mlp {
        let h = self.config.hidden;
        let depth = if input_dim == h {
            self.config.mlp_depth
        } else {
            self.config.mlp_depth.max(1)
        };
        Mlp::with_depth(input_prefix(name), input_dim, h, h, depth).expect("depth chosen to fit")
    }

    /// Runs the input transform and every layer over a batch.
    pub fn encode(&self, s: &mut Session, input: &Mlp, batch: &Batch) -> Result<EncoderOutput> {
        let dropout = self.config.encoder_dropout;
        let fx = s.tape.constant(batch.fx.clone());
        let x = input.forward(s, fx, dropout)?;
        let mut features = vec![x];
        let mut y = x;
        for layer in &self.layers {
            let h = s.tape.concat(&features, Axis::Cols)?;
            y = layer.forward(s, h, &batch.filter, dropout)?;
            features.push(y);
        }
        let z = s.tape.sparse_matmul(&batch.pool, y)?;
        Ok(EncoderOutput { input: x, y, z })
    }
}

pub fn input_prefix(dataset: &str) -> String {
    format!("dataset.{dataset}.input")
}
