use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{LabelSet, ProbeDataset, DECODER_STACK};
use crate::model::TransformerConfig;
use crate::{Error, Result};

pub const WEIGHT_DECAY: f64 = 1e-4;

/// Linear softmax classifier over hidden states, stored in the raw (not
/// standardised) feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub layer: usize,
    pub stack: String,
    pub label_set: LabelSet,
    pub labels: Vec<String>,
    pub d_model: usize,
    /// `[labels, d_model]`, row-major.
    #[serde(skip)]
    pub weights: Vec<f32>,
    #[serde(skip)]
    pub bias: Vec<f32>,
}

impl ProbeModel {
    /// All-zero probe: every label gets probability `1/K`.
    pub fn uniform(layer: usize, label_set: LabelSet, d_model: usize) -> ProbeModel {
        let labels = label_set.labels();
        ProbeModel {
            layer,
            stack: DECODER_STACK.to_string(),
            label_set,
            weights: vec![0.0; labels.len() * d_model],
            bias: vec![0.0; labels.len()],
            labels,
            d_model,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Softmax over labels for one feature row.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .chunks_exact(self.d_model)
            .zip(&self.bias)
            .map(|(w, &b)| b as f64 + w.iter().zip(x).map(|(&w, &x)| w as f64 * x).sum::<f64>())
            .collect();
        softmax(&logits)
    }

    /// Rejects a probe whose geometry or placement does not fit a model.
    pub fn check_compatible(&self, config: &TransformerConfig, layer: usize, stack: &str) -> Result<()> {
        let fail = |m: String| Err(Error::Compatibility(m));
        if stack != DECODER_STACK || self.stack != stack {
            return fail(format!("probe stack {:?} cannot be used for stack {stack:?}", self.stack));
        }
        if self.layer != layer {
            return fail(format!("probe was trained for layer {}, requested layer {layer}", self.layer));
        }
        if layer >= config.num_decoder_layers {
            return fail(format!("layer {layer} out of range: model has {} layers", config.num_decoder_layers));
        }
        if self.d_model != config.d_model {
            return fail(format!("probe expects d_model {}, model has {}", self.d_model, config.d_model));
        }
        if self.labels != self.label_set.labels() {
            return fail(format!("probe labels do not match the {} label set", self.label_set));
        }
        Ok(())
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Per-column mean and standard deviation (1 for constant columns).
fn standardiser(ds: &ProbeDataset) -> (Vec<f64>, Vec<f64>) {
    let n = ds.len() as f64;
    let d = ds.dim;
    let mut mean = vec![0.0; d];
    for i in 0..ds.len() {
        mean.iter_mut().zip(ds.row(i)).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for i in 0..ds.len() {
        for ((v, x), m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let sd = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 { s } else { 1.0 }
        })
        .collect();
    (mean, sd)
}

/// Upper bound on the smoothness constant of the mean softmax loss with
/// weight decay: `0.5 * ‖C‖ + λ` with `C = ẐᵀẐ / N` over standardised
/// features plus a bias column; `‖C‖₂` is bounded by the smaller of the
/// Frobenius norm and the maximum absolute column sum.
fn smoothness(z: &[f64], n: usize, d1: usize) -> f64 {
    let mut c = vec![0.0; d1 * d1];
    unsafe {
        matrixmultiply::dgemm(
            d1, n, d1, 1.0 / n as f64,
            z.as_ptr(), 1, d1 as isize,
            z.as_ptr(), d1 as isize, 1,
            0.0, c.as_mut_ptr(), d1 as isize, 1,
        );
    }
    let fro = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let col = (0..d1)
        .map(|j| (0..d1).map(|i| c[i * d1 + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    0.5 * fro.min(col) + WEIGHT_DECAY
}

/// Fits a probe by full-batch gradient descent and returns it with the
/// training objective before each epoch plus after the last.
///
/// The step size is `min(learning_rate, 1/L)` with `L` from [`smoothness`],
/// which makes the objective non-increasing.
pub fn fit_probe(ds: &ProbeDataset, epochs: usize, learning_rate: f64, seed: u64) -> Result<(ProbeModel, Vec<f64>)> {
    let k = ds.num_labels();
    let mut present = vec![false; k];
    for &l in &ds.labels {
        if l >= k {
            return Err(Error::Data(format!("label index {l} outside a {k}-label set")));
        }
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Degenerate("probe training needs at least two distinct labels".into()));
    }
    let (n, d) = (ds.len(), ds.dim);
    let d1 = d + 1;
    let (mean, sd) = standardiser(ds);
    let mut z = vec![0.0; n * d1];
    for i in 0..n {
        let zi = &mut z[i * d1..(i + 1) * d1];
        for (j, &x) in ds.row(i).iter().enumerate() {
            zi[j] = (x - mean[j]) / sd[j];
        }
        zi[d] = 1.0;
    }
    let lr = learning_rate.min(1.0 / smoothness(&z, n, d1));

    // Parameters `[k, d1]`; the last column is the bias.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w: Vec<f64> = (0..k * d1)
        .map(|i| if i % d1 == d { 0.0 } else { init.sample(&mut rng) })
        .collect();
    let mut logits = vec![0.0; n * k];
    let mut grad = vec![0.0; k * d1];
    let mut history = Vec::with_capacity(epochs + 1);

    let objective = |w: &[f64], logits: &mut [f64], resid: bool| -> f64 {
        unsafe {
            matrixmultiply::dgemm(
                n, d1, k, 1.0,
                z.as_ptr(), d1 as isize, 1,
                w.as_ptr(), 1, d1 as isize,
                0.0, logits.as_mut_ptr(), k as isize, 1,
            );
        }
        let mut loss = 0.0;
        for (row, &y) in logits.chunks_exact_mut(k).zip(&ds.labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                s += *v;
            }
            loss += s.ln() - (row[y].ln());
            row.iter_mut().for_each(|v| *v /= s);
            if resid {
                row[y] -= 1.0;
            }
        }
        let reg: f64 = w
            .chunks_exact(d1)
            .map(|r| r[..d].iter().map(|v| v * v).sum::<f64>())
            .sum();
        loss / n as f64 + 0.5 * WEIGHT_DECAY * reg
    };

    for _ in 0..epochs {
        history.push(objective(&w, &mut logits, true));
        // grad = residᵀ Z / N + λ W (no decay on the bias column).
        unsafe {
            matrixmultiply::dgemm(
                k, n, d1, 1.0 / n as f64,
                logits.as_ptr(), 1, k as isize,
                z.as_ptr(), d1 as isize, 1,
                0.0, grad.as_mut_ptr(), d1 as isize, 1,
            );
        }
        for (i, (wi, gi)) in w.iter_mut().zip(&grad).enumerate() {
            let decay = if i % d1 == d { 0.0 } else { WEIGHT_DECAY * *wi };
            *wi -= lr * (gi + decay);
        }
    }
    history.push(objective(&w, &mut logits, false));

    let mut weights = vec![0.0f32; k * d];
    let mut bias = vec![0.0f32; k];
    for c in 0..k {
        let row = &w[c * d1..(c + 1) * d1];
        let mut b = row[d];
        for j in 0..d {
            let wj = row[j] / sd[j];
            weights[c * d + j] = wj as f32;
            b -= wj * mean[j];
        }
        bias[c] = b as f32;
    }
    let probe = ProbeModel {
        layer: ds.layer,
        stack: ds.stack.clone(),
        label_set: ds.label_set,
        labels: ds.label_names.clone(),
        d_model: d,
        weights,
        bias,
    };
    Ok((probe, history))
}

/// Fits a multinomial logistic-regression probe (weight decay 1e-4).
pub fn train_probe(ds: &ProbeDataset, epochs: usize, learning_rate: f64, seed: u64) -> Result<ProbeModel> {
    fit_probe(ds, epochs, learning_rate, seed).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: Vec<usize>, features: Vec<f64>, dim: usize) -> ProbeDataset {
        ProbeDataset {
            layer: 0,
            stack: DECODER_STACK.into(),
            label_set: LabelSet::Pos,
            label_names: LabelSet::Pos.labels(),
            dim,
            features,
            labels,
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let features: Vec<f64> = labels
            .iter()
            .flat_map(|&l| {
                let base = noise.sample(&mut rng);
                [l as f64 + base, 5.0 * noise.sample(&mut rng), base * 100.0]
            })
            .collect();
        let (_, hist) = fit_probe(&toy(labels, features, 3), 100, 10.0, 0).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{hist:?}");
        assert!(hist.last().unwrap() < &hist[0]);
    }

    #[test]
    fn single_label_is_degenerate() {
        let ds = toy(vec![2; 5], vec![0.0; 10], 2);
        assert!(matches!(train_probe(&ds, 10, 1.0, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compatibility_checks() {
        let cfg = TransformerConfig::default();
        let p = ProbeModel::uniform(1, LabelSet::Roles, 96);
        p.check_compatible(&cfg, 1, "decoder").unwrap();
        for (layer, stack) in [(0, "decoder"), (1, "encoder")] {
            assert!(matches!(p.check_compatible(&cfg, layer, stack), Err(Error::Compatibility(_))));
        }
        let small = TransformerConfig { d_model: 64, num_heads: 4, ..cfg };
        assert!(p.check_compatible(&small, 1, "decoder").is_err());
        assert_eq!(p.probabilities(&[1.0; 96]), vec![1.0 / 11.0; 11]);
    }
}
