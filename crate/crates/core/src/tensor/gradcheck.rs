//! Central finite-difference verification of tape gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Tape, Tensor, TensorError, Var};

/// Builds an op output from input leaves.
pub trait OpUnderTest: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>, TensorError> {}
impl<F> OpUnderTest for F where F: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>, TensorError> {}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Per input, `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`.
    pub relative_errors: Vec<f64>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Scalarises `op` as `sum(w * op(x))` with a seeded Gaussian `w`, then
/// compares the tape gradient of every input with central differences of
/// step `h`.
pub fn check_op(op: impl OpUnderTest, inputs: &[Tensor<f64>], h: f64, seed: u64) -> Result<GradCheck, TensorError> {
    let out_shape = {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        op(&vars)?.shape()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = out_shape.iter().product();
    let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let weights = Tensor::new(&out_shape, w)?;

    let scalar = |xs: &[Tensor<f64>]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let wv = tape.constant(weights.clone());
        Ok(op(&vars)?.mul(&wv)?.sum()?.item())
    };

    let analytic: Vec<Vec<f64>> = {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let wv = tape.constant(weights.clone());
        op(&vars)?.mul(&wv)?.sum()?.backward()?;
        vars.iter()
            .zip(inputs)
            .map(|(v, t)| v.grad().map_or_else(|| vec![0.0; t.numel()], Tensor::into_data))
            .collect()
    };

    let mut relative_errors = Vec::with_capacity(inputs.len());
    for (i, ga) in analytic.iter().enumerate() {
        let mut xs = inputs.to_vec();
        let mut gn = Vec::with_capacity(ga.len());
        for j in 0..ga.len() {
            let orig = xs[i].data[j];
            xs[i].data[j] = orig + h;
            let plus = scalar(&xs)?;
            xs[i].data[j] = orig - h;
            let minus = scalar(&xs)?;
            xs[i].data[j] = orig;
            gn.push((plus - minus) / (2.0 * h));
        }
        let diff = ga.iter().zip(&gn).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na = ga.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = gn.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        relative_errors.push(if scale == 0.0 { 0.0 } else { diff / scale });
    }
    Ok(GradCheck { relative_errors })
}
