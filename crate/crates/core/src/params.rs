//! Named parameters and the per-batch forward session.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::autodiff::{Gradients, RunningStats, Tape, Var};
use crate::data::checkpoint::Record;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// All model tensors by name. Trainable entries are optimized; the rest
/// (batch-norm running statistics) are buffers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, Record>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn from_records(entries: BTreeMap<String, Record>) -> Self {
        ParamStore { entries }
    }

    pub fn records(&self) -> &BTreeMap<String, Record> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.get(name).map(|r| &r.value)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|r| r.trainable)
    }

    pub fn set(&mut self, name: &str, value: Matrix) -> Result<()> {
        let rec = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))?;
        if rec.value.shape() != value.shape() {
            return Err(Error::shape("set parameter", &rec.value.shape(), &value.shape()));
        }
        rec.value = value;
        Ok(())
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) {
        self.entries.insert(name.into(), Record { trainable, value });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, r)| r.trainable)
            .map(|(n, _)| n.as_str())
    }

    /// Adds a Glorot-uniform `rows × cols` weight unless present. The draw
    /// depends only on `seed` and `name`.
    pub fn init_weight(&mut self, name: &str, rows: usize, cols: usize, seed: u64) {
        if self.contains(name) {
            return;
        }
        let mut r = rng::stream(seed, rng::name_stream(name));
        let a = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let w = Matrix::from_fn(rows, cols, |_, _| r.random_range(-a..=a));
        self.insert(name, w, true);
    }

    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        if !self.contains(name) {
            self.insert(name, Matrix::zeros(rows, cols), true);
        }
    }

    /// Running mean (zeros) and variance (ones) buffers under `name.mean`
    /// and `name.var`.
    pub fn init_running_stats(&mut self, name: &str, channels: usize) {
        let mean = format!("{name}.mean");
        if !self.contains(&mean) {
            self.insert(mean, Matrix::zeros(1, channels), false);
            self.insert(format!("{name}.var"), Matrix::filled(1, channels, 1.0), false);
        }
    }

    fn running_stats(&self, name: &str) -> Result<RunningStats> {
        let get = |suffix: &str| {
            self.get(&format!("{name}.{suffix}"))
                .map(|m| m.data().to_vec())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown batch-norm buffer `{name}`")))
        };
        Ok(RunningStats {
            mean: get("mean")?,
            var: get("var")?,
        })
    }

    fn store_running_stats(&mut self, name: &str, stats: RunningStats) {
        let c = stats.channels();
        for (suffix, v) in [("mean", stats.mean), ("var", stats.var)] {
            if let Some(r) = self.entries.get_mut(&format!("{name}.{suffix}")) {
                r.value = Matrix::from_vec(1, c, v).expect("channel count");
            }
        }
    }

    /// Copies every entry of `other` whose name passes `filter`.
    pub fn copy_from(&mut self, other: &ParamStore, filter: impl Fn(&str) -> bool) {
        for (name, rec) in &other.entries {
            if filter(name) {
                self.entries.insert(name.clone(), rec.clone());
            }
        }
    }

    pub fn remove_prefix(&mut self, prefix: &str) {
        self.entries.retain(|n, _| !n.starts_with(prefix));
    }
}

/// One forward pass: a tape plus lazily bound parameters.
pub struct Session<'a> {
    pub tape: &'a mut Tape,
    store: &'a mut ParamStore,
    bound: BTreeMap<String, Var>,
    pub train: bool,
}

impl<'a> Session<'a> {
    pub fn new(tape: &'a mut Tape, store: &'a mut ParamStore, train: bool) -> Self {
        Session {
            tape,
            store,
            bound: BTreeMap::new(),
            train,
        }
    }

    /// Uses `var` for parameter `name` instead of a fresh leaf.
    pub fn bind(&mut self, name: &str, var: Var) {
        self.bound.insert(name.to_string(), var);
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    /// The tape value of parameter `name`, created on first use.
    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let rec = self
            .store
            .entries
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))?;
        let v = self.tape.leaf(rec.value.clone(), rec.trainable);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn batch_norm(&mut self, x: Var, name: &str) -> Result<Var> {
        let mut stats = self.store.running_stats(name)?;
        let y = self.tape.batch_norm(x, &mut stats, self.train)?;
        if self.train {
            self.store.store_running_stats(name, stats);
        }
        Ok(y)
    }

    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        self.tape.dropout(x, rate, self.train)
    }

    /// Parameters used in this session, by name.
    pub fn bound(&self) -> &BTreeMap<String, Var> {
        &self.bound
    }

    /// Gradients of `loss` for every trainable parameter that was used.
    pub fn gradients(&self, loss: Var) -> Result<BTreeMap<String, Matrix>> {
        let mut grads: Gradients = self.tape.backward(loss)?;
        let mut out = BTreeMap::new();
        for (name, &v) in &self.bound {
            if !self.store.is_trainable(name) {
                continue;
            }
            let g = grads.take(v).unwrap_or_else(|| {
                let [n, c] = self.tape.shape(v);
                Matrix::zeros(n, c)
            });
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}
