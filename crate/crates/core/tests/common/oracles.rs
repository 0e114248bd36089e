//! Reference implementations and fixtures shared by the integration and
//! acceptance suites. Each oracle is written independently of the library
//! routine it checks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trace_core::model::{Batch, DecoderModel, TransformerConfig, BOS, EOS, PAD};
use trace_core::tensor::Precision;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random `n×n` orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_vec(n, n, gaussian(&mut r, n * n)).qr().q()
}

/// Random symmetric matrix, row-major.
pub fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let g = gaussian(&mut r, n * n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (g[i * n + j] + g[j * n + i]);
        }
    }
    a
}

/// `GᵀG / n` for a Gaussian `G`, row-major.
pub fn random_psd(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let g = DMatrix::from_vec(n, n, gaussian(&mut r, n * n));
    let a = g.transpose() * &g / n as f64;
    (0..n * n).map(|k| a[(k / n, k % n)]).collect()
}

/// Eigenvalues in descending order from nalgebra's dense solver.
pub fn dense_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(DMatrix::from_row_slice(n, n, a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Rows of a point cloud after applying an orthogonal map and a scale.
pub fn transform(rows: &[Vec<f64>], q: &DMatrix<f64>, scale: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|x| {
            let y = q * nalgebra::DVector::from_column_slice(x);
            y.iter().map(|v| v * scale).collect()
        })
        .collect()
}

/// `n` points on a unit circle embedded in `ambient` dimensions by a random
/// isometry.
pub fn circle(n: usize, ambient: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let q = random_rotation(ambient, seed ^ 0x51);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let t = r.random_range(0.0..std::f64::consts::TAU);
            let mut x = vec![0.0; ambient];
            x[0] = t.cos();
            x[1] = t.sin();
            x
        })
        .collect();
    transform(&pts, &q, 1.0)
}

/// `n` points uniform on the unit 2-sphere embedded in `ambient` dimensions.
pub fn sphere(n: usize, ambient: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let q = random_rotation(ambient, seed ^ 0x52);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g = gaussian(&mut r, 3);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut x = vec![0.0; ambient];
            x[..3].iter_mut().zip(&g).for_each(|(o, v)| *o = v / norm);
            x
        })
        .collect();
    transform(&pts, &q, 1.0)
}

/// Brute-force TwoNN maximum likelihood: sort the full distance list of each
/// distinct point, take the two smallest, and censor the top fraction of
/// ratios at the largest kept one.
pub fn twonn_oracle(rows: &[Vec<f64>], discard: f64) -> f64 {
    let mut uniq: Vec<Vec<f64>> = rows.to_vec();
    uniq.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    uniq.dedup();
    let mut mu: Vec<f64> = uniq
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut d: Vec<f64> = uniq
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, y)| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .collect();
            d.sort_by(f64::total_cmp);
            (d[1] / d[0]).sqrt()
        })
        .collect();
    mu.sort_by(f64::total_cmp);
    let n = mu.len();
    let kept = n - (n as f64 * discard).floor() as usize;
    let logs: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let censored = (n - kept) as f64 * logs[kept - 1];
    kept as f64 / (logs[..kept].iter().sum::<f64>() + censored)
}

/// A model small enough to materialise its Hessian: 1 layer, d_model 4,
/// vocabulary 24. Runs in 64-bit mode.
pub fn micro_model(seed: u64) -> DecoderModel {
    let cfg = TransformerConfig {
        vocab_size: None,
        d_model: 4,
        num_heads: 2,
        num_decoder_layers: 1,
        d_ff: 8,
        max_seq_length: 8,
        dropout: 0.0,
        ..TransformerConfig::default()
    };
    DecoderModel::new(cfg, 24, seed).unwrap().with_precision(Precision::F64)
}

/// A random padded batch over `vocab` ids.
pub fn random_batch(vocab: usize, rows: usize, seed: u64) -> Batch {
    let mut r = rng(seed);
    let len = 6;
    let mut inputs = vec![PAD; rows * len];
    let mut targets = vec![PAD; rows * len];
    let mut lengths = Vec::new();
    for row in 0..rows {
        let n = r.random_range(2..len);
        let ids: Vec<usize> = (0..n).map(|_| r.random_range(4..vocab)).collect();
        inputs[row * len] = BOS;
        inputs[row * len + 1..row * len + 1 + n].copy_from_slice(&ids);
        targets[row * len..row * len + n].copy_from_slice(&ids);
        targets[row * len + n] = EOS;
        lengths.push(n);
    }
    Batch {
        inputs,
        targets,
        rows,
        len,
        sentence_ids: (0..rows).collect(),
        lengths,
    }
}

/// Explicit Hessian by differencing the analytic gradient along each
/// coordinate, symmetrised. Row-major `n×n`.
pub fn explicit_hessian(model: &DecoderModel, batch: &Batch, h: f64) -> Vec<f64> {
    let theta = model.params().to_vec();
    let n = theta.len();
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let mut p = theta.clone();
        p[i] = theta[i] + h;
        let gp = model.loss_and_grad(&p, batch, None).unwrap().1;
        p[i] = theta[i] - h;
        let gm = model.loss_and_grad(&p, batch, None).unwrap().1;
        for j in 0..n {
            hess[j * n + i] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (hess[i * n + j] + hess[j * n + i]);
            hess[i * n + j] = s;
            hess[j * n + i] = s;
        }
    }
    hess
}

pub fn matvec(n: usize, a: &[f64], v: &[f64]) -> Vec<f64> {
    a.chunks_exact(n).map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// `k` Gaussian blobs in `d` dimensions with centres `spread` apart along
/// distinct axes and unit-variance noise scaled by `noise`.
pub fn blobs(k: usize, d: usize, per: usize, spread: f64, noise: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(k * per * d);
    let mut y = Vec::with_capacity(k * per);
    for c in 0..k {
        for _ in 0..per {
            let mut p: Vec<f64> = gaussian(&mut r, d).into_iter().map(|v| v * noise).collect();
            p[c % d] += spread;
            x.extend(p);
            y.push(c);
        }
    }
    (x, y)
}

/// Perceptron on `[x, 1]`: returns whether it reaches zero training errors
/// within `epochs` passes, which certifies linear separability.
pub fn perceptron_separable(x: &[f64], y: &[usize], d: usize, k: usize, epochs: usize) -> bool {
    let mut w = vec![0.0; k * (d + 1)];
    let score = |w: &[f64], xi: &[f64], c: usize| {
        let row = &w[c * (d + 1)..(c + 1) * (d + 1)];
        row[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + row[d]
    };
    for _ in 0..epochs {
        let mut errors = 0;
        for (xi, &yi) in x.chunks_exact(d).zip(y) {
            let pred = (0..k).max_by(|&a, &b| score(&w, xi, a).total_cmp(&score(&w, xi, b))).unwrap();
            if pred != yi {
                errors += 1;
                for (c, sign) in [(yi, 1.0), (pred, -1.0)] {
                    let row = &mut w[c * (d + 1)..(c + 1) * (d + 1)];
                    row[..d].iter_mut().zip(xi).for_each(|(a, b)| *a += sign * b);
                    row[d] += sign;
                }
            }
        }
        if errors == 0 {
            return true;
        }
    }
    false
}
