//! The shared encoder with its per-dataset input transforms, class heads
//! and kernel heads, plus checkpoint conversion.

use std::collections::BTreeMap;

use crate::autodiff::Tape;
use crate::data::checkpoint::Checkpoint;
use crate::data::Dataset;
use crate::decoder::{kernel_head_name, probabilities, ADAPTIVE_HEAD};
use crate::encoder::batch::input_dim;
use crate::encoder::{input_prefix, Batch, Encoder, EncoderConfig, Mlp, PreparedGraph};
use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::matrix::Matrix;
use crate::params::{ParamStore, Session};

/// Widths of one dataset's private layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetShape {
    pub input_dim: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: Encoder,
    pub kinds: Vec<KernelKind>,
    pub params: ParamStore,
    datasets: BTreeMap<String, DatasetShape>,
    seed: u64,
}

pub fn head_prefix(dataset: &str) -> String {
    format!("dataset.{dataset}.head")
}

impl Model {
    /// Fresh encoder and kernel heads drawn from `seed`.
    pub fn new(config: EncoderConfig, kinds: &[KernelKind], seed: u64) -> Result<Self> {
        let encoder = Encoder::new(config)?;
        let mut params = ParamStore::new();
        encoder.init(&mut params, seed);
        let h = encoder.output_dim();
        for &k in kinds {
            params.init_weight(&kernel_head_name(k), h, h, seed);
        }
        params.init_weight(ADAPTIVE_HEAD, h, h, seed);
        Ok(Model {
            encoder,
            kinds: kinds.to_vec(),
            params,
            datasets: BTreeMap::new(),
            seed,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.encoder.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn datasets(&self) -> &BTreeMap<String, DatasetShape> {
        &self.datasets
    }

    /// Registers dataset `name`, creating its input transform and class head
    /// from the model seed unless they already exist with matching widths.
    pub fn add_dataset(&mut self, name: &str, shape: DatasetShape) -> Result<()> {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid dataset name {name:?}")));
        }
        if let Some(old) = self.datasets.get(name) {
            if *old != shape {
                return Err(Error::InvalidArgument(format!(
                    "dataset `{name}` is registered with {old:?}, not {shape:?}"
                )));
            }
            return Ok(());
        }
        self.datasets.insert(name.to_string(), shape);
        self.input_mlp(name)?.init(&mut self.params, self.seed);
        self.head(name)?.init(&mut self.params, self.seed);
        Ok(())
    }

    /// Registers `ds` under its own name with its feature width.
    pub fn register(&mut self, ds: &Dataset) -> Result<()> {
        let shape = DatasetShape {
            input_dim: input_dim(ds, &self.encoder.config),
            num_classes: ds.num_classes,
        };
        self.add_dataset(&ds.name, shape)
    }

    fn shape(&self, name: &str) -> Result<DatasetShape> {
        self.datasets
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("dataset `{name}` is not registered")))
    }

    pub fn input_mlp(&self, name: &str) -> Result<Mlp> {
        Ok(self.encoder.input_mlp(name, self.shape(name)?.input_dim))
    }

    /// Class head: two hidden layers of the hidden width, then the classes.
    pub fn head(&self, name: &str) -> Result<Mlp> {
        let c = self.shape(name)?.num_classes.max(1);
        let h = self.encoder.config.hidden;
        Ok(Mlp::new(head_prefix(name), vec![self.encoder.output_dim(), h, h, c]))
    }

    /// Names of every record private to dataset `name`.
    pub fn dataset_param_names(&self, name: &str) -> Vec<String> {
        let prefix = format!("dataset.{name}.");
        self.params
            .names()
            .filter(|n| n.starts_with(&prefix))
            .map(str::to_string)
            .collect()
    }

    /// Replaces every shared record (encoder and kernel heads) by the one in
    /// `other`.
    pub fn load_shared_from(&mut self, other: &Model) -> Result<()> {
        for name in other.params.names().filter(|n| !n.starts_with("dataset.")) {
            let v = other.params.get(name).expect("listed");
            match self.params.get(name) {
                Some(mine) if mine.shape() == v.shape() => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "shared parameter `{name}` does not fit this model"
                    )))
                }
            }
        }
        self.params.copy_from(&other.params, |n| !n.starts_with("dataset."));
        Ok(())
    }

    pub fn to_checkpoint(&self, config_echo: &str) -> Checkpoint {
        Checkpoint {
            config_echo: config_echo.to_string(),
            datasets: self
                .datasets
                .keys()
                .map(|d| (d.clone(), self.dataset_param_names(d)))
                .collect(),
            records: self.params.records().clone(),
        }
    }

    /// Rebuilds a model from a checkpoint. Every shared record expected by
    /// `config` and `kinds` must be present with the right shape; dataset
    /// widths are read back from the registered records.
    pub fn from_checkpoint(ck: &Checkpoint, config: EncoderConfig, kinds: &[KernelKind], seed: u64) -> Result<Self> {
        let fresh = Model::new(config, kinds, seed)?;
        for name in fresh.params.names() {
            let want = fresh.params.get(name).expect("listed").shape();
            match ck.records.get(name) {
                Some(r) if r.value.shape() == want => {}
                Some(r) => {
                    return Err(Error::InvalidArgument(format!(
                        "checkpoint record `{name}` has shape {:?}, config expects {want:?}",
                        r.value.shape()
                    )))
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "checkpoint lacks `{name}` required by the config"
                    )))
                }
            }
        }
        let mut model = fresh;
        model.params = ParamStore::from_records(ck.records.clone());
        for (ds, names) in &ck.datasets {
            let input = format!("{}.0.w", input_prefix(ds));
            let input_dim = ck
                .records
                .get(&input)
                .map_or(model.encoder.config.hidden, |r| r.value.rows());
            let last = names
                .iter()
                .filter(|n| n.starts_with(&head_prefix(ds)) && n.ends_with(".w"))
                .filter_map(|n| ck.records.get(n))
                .next_back()
                .ok_or_else(|| Error::Format(format!("dataset `{ds}` has no head in the checkpoint")))?;
            let shape = DatasetShape {
                input_dim,
                num_classes: last.value.cols(),
            };
            model.datasets.insert(ds.clone(), shape);
            // Validate that the stored records match the layout.
            for mlp in [model.input_mlp(ds)?, model.head(ds)?] {
                for k in 0..mlp.depth() {
                    if !model.params.contains(&mlp.weight_name(k)) {
                        return Err(Error::Format(format!("checkpoint lacks `{}`", mlp.weight_name(k))));
                    }
                }
            }
        }
        Ok(model)
    }

    /// Evaluation-mode graph embeddings (one row per index) and class
    /// probabilities for graphs of dataset `name`.
    pub fn embed(&self, name: &str, prepared: &[PreparedGraph], indices: &[usize]) -> Result<(Matrix, Matrix)> {
        let batch = Batch::new(prepared, indices, None)?;
        let input = self.input_mlp(name)?;
        let head = self.head(name)?;
        let mut params = self.params.clone();
        let mut tape = Tape::new(self.seed);
        let mut s = Session::new(&mut tape, &mut params, false);
        let out = self.encoder.encode(&mut s, &input, &batch)?;
        let logits = head.forward(&mut s, out.z, 0.0)?;
        Ok((s.tape.value(out.z).clone(), probabilities(s.tape.value(logits))))
    }
}
