//! Multi-layer perceptrons over node or graph rows.

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};

/// Linear layers `dims[0] → dims[1] → … → dims[last]`. Hidden layers are
/// followed by batch norm, ReLU and dropout; the last layer is linear.
/// With a single entry in `dims` the MLP is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    prefix: String,
    dims: Vec<usize>,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty(), "an MLP needs at least its input width");
        Mlp {
            prefix: prefix.into(),
            dims,
        }
    }

    /// `depth` linear layers from `input` to `output` with hidden width
    /// `hidden`. Depth 0 requires `input == output`.
    pub fn with_depth(
        prefix: impl Into<String>,
        input: usize,
        hidden: usize,
        output: usize,
        depth: usize,
    ) -> Result<Self> {
        if depth == 0 {
            if input != output {
                return Err(Error::InvalidArgument(format!(
                    "identity MLP cannot map width {input} to {output}"
                )));
            }
            return Ok(Mlp::new(prefix, vec![input]));
        }
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(hidden, depth - 1));
        dims.push(output);
        Ok(Mlp::new(prefix, dims))
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty")
    }

    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.{layer}.w", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.{layer}.b", self.prefix)
    }

    fn norm_name(&self, layer: usize) -> String {
        format!("{}.{layer}.bn", self.prefix)
    }

    pub fn init(&self, store: &mut ParamStore, seed: u64) {
        for k in 0..self.depth() {
            let (i, o) = (self.dims[k], self.dims[k + 1]);
            store.init_weight(&self.weight_name(k), i, o, seed);
            store.init_zeros(&self.bias_name(k), 1, o);
            if k + 1 < self.depth() {
                store.init_running_stats(&self.norm_name(k), o);
            }
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var, dropout: f64) -> Result<Var> {
        let width = s.tape.shape(x)[1];
        if width != self.input_dim() {
            return Err(Error::shape(
                "mlp input",
                &[s.tape.shape(x)[0], width],
                &[self.input_dim()],
            ));
        }
        let mut h = x;
        for k in 0..self.depth() {
            let w = s.param(&self.weight_name(k))?;
            let b = s.param(&self.bias_name(k))?;
            h = s.tape.matmul(h, w)?;
            h = s.tape.add_row(h, b)?;
            if k + 1 < self.depth() {
                h = s.batch_norm(h, &self.norm_name(k))?;
                h = s.tape.relu(h);
                h = s.dropout(h, dropout)?;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::matrix::Matrix;

    #[test]
    fn depth_and_names() {
        let m = Mlp::with_depth("m", 5, 8, 3, 3).unwrap();
        assert_eq!(m.depth(), 3);
        let mut store = ParamStore::new();
        m.init(&mut store, 0);
        assert_eq!(store.get("m.0.w").unwrap().shape(), [5, 8]);
        assert_eq!(store.get("m.2.w").unwrap().shape(), [8, 3]);
        assert!(store.contains("m.1.bn.var") && !store.contains("m.2.bn.var"));
        assert!(Mlp::with_depth("i", 2, 8, 3, 0).is_err());
    }

    #[test]
    fn identity_and_linear() {
        let mut store = ParamStore::new();
        let id = Mlp::with_depth("id", 2, 2, 2, 0).unwrap();
        let lin = Mlp::with_depth("lin", 2, 2, 1, 1).unwrap();
        lin.init(&mut store, 1);
        store.set("lin.0.w", Matrix::from_rows(&[[1.0], [-2.0]])).unwrap();
        store.set("lin.0.b", Matrix::from_rows(&[[0.5]])).unwrap();
        let mut tape = Tape::new(0);
        let mut s = Session::new(&mut tape, &mut store, true);
        let x = s.tape.constant(Matrix::from_rows(&[[1.0, 1.0], [3.0, 0.0]]));
        assert_eq!(id.forward(&mut s, x, 0.5).unwrap(), x);
        let y = lin.forward(&mut s, x, 0.5).unwrap();
        assert_eq!(s.tape.value(y), &Matrix::from_rows(&[[-0.5], [3.5]]));
    }
}
