use std::fmt;

use serde::Serialize;

use super::hvp::{HvpOracle, ModelOracle};
use super::lanczos::lanczos;
use super::trace::hutchinson_trace;
use crate::model::{Batch, Component, DecoderModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureSplit {
    Train,
    Val,
}

impl fmt::Display for CurvatureSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurvatureSplit::Train => "train",
            CurvatureSplit::Val => "val",
        })
    }
}

/// `None` stands for the full parameter vector.
pub fn component_label(c: Option<Component>) -> &'static str {
    c.map_or("all", Component::as_str)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSettings {
    pub k: usize,
    /// Defaults to `max(3k, 30)`, capped at the subspace size.
    pub max_iters: Option<usize>,
    pub probes: usize,
    pub seed: u64,
    pub eps_scale: Option<f64>,
    pub alignment: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub step: u64,
    pub split: CurvatureSplit,
    pub component: String,
    /// Descending; shorter than k only after a Lanczos breakdown.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub trace: f64,
    pub trace_stderr: f64,
    pub grad_norm: f64,
    pub grad_alignment: Option<f64>,
    pub hvp_count: usize,
    pub breakdown: bool,
}

/// Cosine between a gradient and a (dominant) eigenvector; `None` for a zero
/// gradient.
pub fn gradient_alignment(grad: &[f64], top_vector: &[f64]) -> Option<f64> {
    let gn = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vn = top_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gn == 0.0 || vn == 0.0 {
        return None;
    }
    let c = grad.iter().zip(top_vector).map(|(a, b)| a * b).sum::<f64>() / (gn * vn);
    Some(c.clamp(-1.0, 1.0))
}

/// Top-k Hessian spectrum, Hutchinson trace and (optionally) gradient
/// alignment of the evaluation loss on `batch`, restricted to one parameter
/// component by masking directions before and after each product.
pub fn component_spectrum(
    model: &DecoderModel,
    batch: &Batch,
    component: Option<Component>,
    settings: &SpectrumSettings,
    step: u64,
    split: CurvatureSplit,
) -> Result<SpectrumRecord> {
    let mask = match component {
        None => None,
        Some(c) => {
            let (specs, mask) = model.parameters_of(c);
            if specs.is_empty() {
                return Err(Error::Usage(format!("component {c} has no parameters")));
            }
            Some(mask)
        }
    };
    let mut oracle = ModelOracle::new(model, batch, mask, settings.eps_scale)?;
    let active = oracle.active();
    let k = settings.k.min(active);
    let iters = settings.max_iters.unwrap_or((3 * settings.k).max(30)).clamp(k, active);
    let (_, grad) = oracle.loss_and_grad()?;
    let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lz = lanczos(&mut oracle, k, iters, settings.seed)?;
    let grad_alignment = if settings.alignment {
        lz.vectors.first().and_then(|v| gradient_alignment(&grad, v))
    } else {
        None
    };
    let tr = hutchinson_trace(&mut oracle, settings.probes, settings.seed ^ 0x7ace)?;
    Ok(SpectrumRecord {
        step,
        split,
        component: component_label(component).to_string(),
        eigenvalues: lz.eigenvalues,
        residuals: lz.residuals,
        trace: tr.mean,
        trace_stderr: tr.stderr,
        grad_norm,
        grad_alignment,
        hvp_count: oracle.calls(),
        breakdown: lz.breakdown,
    })
}

/// `0.5·|a−b|/(|a|+|b|+1e-12)` for the top eigenvalue plus the same for the
/// trace.
pub fn divergence(l1_train: f64, l1_val: f64, tr_train: f64, tr_val: f64) -> f64 {
    let term = |a: f64, b: f64| (a - b).abs() / (a.abs() + b.abs() + 1e-12);
    0.5 * term(l1_train, l1_val) + 0.5 * term(tr_train, tr_val)
}

/// Train/validation curvature gap for records of the same step and
/// component; `None` when either lacks a top eigenvalue or trace.
pub fn landscape_divergence(train: &SpectrumRecord, val: &SpectrumRecord) -> Result<Option<f64>> {
    if train.step != val.step || train.component != val.component {
        return Err(Error::Usage(format!(
            "divergence compares step {} {} with step {} {}",
            train.step, train.component, val.step, val.component
        )));
    }
    let (Some(&a), Some(&b)) = (train.eigenvalues.first(), val.eigenvalues.first()) else {
        return Ok(None);
    };
    if !(a.is_finite() && b.is_finite() && train.trace.is_finite() && val.trace.is_finite()) {
        return Ok(None);
    }
    Ok(Some(divergence(a, b, train.trace, val.trace)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence(3.0, 3.0, 5.0, 5.0), 0.0);
        assert!((divergence(10.0, 0.0, 10.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((divergence(8.0, 4.0, 6.0, 6.0) - 0.5 * 4.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn alignment_cases() {
        assert_eq!(gradient_alignment(&[0.0, 0.0, 2.0], &[0.0, 0.0, -1.0]), Some(-1.0));
        assert_eq!(gradient_alignment(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), Some(0.0));
        assert_eq!(gradient_alignment(&[0.0; 3], &[0.0, 0.0, 1.0]), None);
    }
}
