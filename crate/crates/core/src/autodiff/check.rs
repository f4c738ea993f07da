//! Finite-difference gradient checking.

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest relative disagreement between the tape gradient of `f` and a
/// central difference with step `eps`, over every coordinate of every
/// input: `max |analytic − numeric| / max(1, |numeric|)`.
///
/// `f` is rebuilt on a fresh tape (seeded with `seed`) for each
/// evaluation, so dropout masks repeat exactly.
pub fn grad_check<F>(f: F, inputs: &[Matrix], eps: f64, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::InvalidArgument(format!("step {eps} outside [1e-7, 1e-4]")));
    }
    let eval = |xs: &[Matrix]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new(seed);
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
        let out = f(&mut tape, &vars)?;
        if tape.shape(out) != [1, 1] {
            return Err(Error::shape("grad_check (scalar output)", &tape.shape(out), &[1, 1]));
        }
        Ok((tape, vars, out))
    };
    let (tape, vars, out) = eval(inputs)?;
    let grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let zeros = Matrix::zeros(inputs[i].rows(), inputs[i].cols());
        let analytic = grads.get(*v).unwrap_or(&zeros);
        for k in 0..inputs[i].len() {
            let orig = xs[i].data()[k];
            xs[i].data_mut()[k] = orig + eps;
            let (t, _, o) = eval(&xs)?;
            let plus = t.value(o).scalar();
            xs[i].data_mut()[k] = orig - eps;
            let (t, _, o) = eval(&xs)?;
            let minus = t.value(o).scalar();
            xs[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = (analytic.data()[k] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
