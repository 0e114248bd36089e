use crate::model::{Batch, DecoderModel};
use crate::tensor::Precision;
use crate::{Error, Result};

/// Something that multiplies vectors by a symmetric matrix.
pub trait HvpOracle {
    fn dim(&self) -> usize;

    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>>;

    /// Projects a vector onto the oracle's active subspace. Start vectors and
    /// probes pass through here; the default subspace is everything.
    fn project(&self, _v: &mut [f64]) {}

    /// Number of `apply` calls so far.
    fn calls(&self) -> usize;
}

/// Exact matrix-vector product with a dense row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    n: usize,
    a: Vec<f64>,
    calls: usize,
}

impl DenseOracle {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Usage(format!("dense oracle needs {} entries, got {}", n * n, a.len())));
        }
        Ok(DenseOracle { n, a, calls: 0 })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        d.iter().enumerate().for_each(|(i, &v)| a[i * n + i] = v);
        DenseOracle { n, a, calls: 0 }
    }
}

impl HvpOracle for DenseOracle {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        Ok(self
            .a
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

pub fn default_eps_scale(precision: Precision) -> f64 {
    match precision {
        Precision::F32 => 1e-3,
        Precision::F64 => 1e-5,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central-difference Hessian-vector product of a gradient function:
/// `(g(θ+εv̂) − g(θ−εv̂)) ‖v‖ / 2ε` with `ε = eps_scale (1 + ‖θ‖∞)`.
pub fn hvp(
    mut lossgrad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    v: &[f64],
    eps_scale: f64,
) -> Result<Vec<f64>> {
    let vn = norm(v);
    if vn == 0.0 || !vn.is_finite() {
        return Err(Error::Usage("hvp direction must have positive finite norm".into()));
    }
    let eps = eps_scale * (1.0 + theta.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let shifted = |sign: f64| -> Vec<f64> { theta.iter().zip(v).map(|(t, x)| t + sign * eps * x / vn).collect() };
    let gp = lossgrad(&shifted(1.0))?;
    let gm = lossgrad(&shifted(-1.0))?;
    if gp.iter().chain(&gm).any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient in hvp with eps={eps:e}")));
    }
    let scale = vn / (2.0 * eps);
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) * scale).collect())
}

/// Finite-difference HVP of the evaluation-mode loss of a model on a fixed
/// batch, optionally restricted to a parameter mask. Owns its copy of θ.
pub struct ModelOracle<'a> {
    model: &'a DecoderModel,
    batch: &'a Batch,
    theta: Vec<f64>,
    mask: Option<Vec<bool>>,
    eps_scale: f64,
    calls: usize,
}

impl<'a> ModelOracle<'a> {
    pub fn new(model: &'a DecoderModel, batch: &'a Batch, mask: Option<Vec<bool>>, eps_scale: Option<f64>) -> Result<Self> {
        if let Some(m) = &mask {
            if m.len() != model.num_params() {
                return Err(Error::Usage("mask length does not match the parameter count".into()));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::Usage("parameter mask is empty".into()));
            }
        }
        Ok(ModelOracle {
            model,
            batch,
            theta: model.params().to_vec(),
            mask,
            eps_scale: eps_scale.unwrap_or_else(|| default_eps_scale(model.precision())),
            calls: 0,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Size of the active subspace.
    pub fn active(&self) -> usize {
        self.mask.as_ref().map_or(self.theta.len(), |m| m.iter().filter(|&&b| b).count())
    }

    /// Loss and (projected) gradient at θ.
    pub fn loss_and_grad(&self) -> Result<(f64, Vec<f64>)> {
        let (l, mut g) = self.model.loss_and_grad(&self.theta, self.batch, None)?;
        self.project(&mut g);
        Ok((l, g))
    }
}

impl HvpOracle for ModelOracle<'_> {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        let mut dir = v.to_vec();
        self.project(&mut dir);
        let (model, batch) = (self.model, self.batch);
        let mut out = hvp(
            |p| Ok(model.loss_and_grad(p, batch, None)?.1),
            &self.theta,
            &dir,
            self.eps_scale,
        )?;
        self.project(&mut out);
        Ok(out)
    }

    fn project(&self, v: &mut [f64]) {
        if let Some(m) = &self.mask {
            v.iter_mut().zip(m).filter(|(_, &keep)| !keep).for_each(|(x, _)| *x = 0.0);
        }
    }

    fn calls(&self) -> usize {
        self.calls
    }
}
