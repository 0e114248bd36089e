use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hvp::HvpOracle;
use crate::{Error, Result};

const BREAKDOWN: f64 = 1e-12;

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts. `diag` has length n and `off` length n-1. Returns
/// eigenvalues (unsorted) and eigenvectors as columns of a row-major n×n
/// matrix.
pub fn tql2(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Usage(format!("tridiagonal sizes {n} and {} do not fit", off.len())));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    (0..n).for_each(|i| z[i * n + i] = 1.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Numeric("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult {
    /// Largest Ritz values, descending (at most k).
    pub eigenvalues: Vec<f64>,
    /// `|β_m s_m|` for each returned Ritz pair.
    pub residuals: Vec<f64>,
    /// Ritz vector of each returned value, signed to have a non-negative
    /// inner product with the start vector.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub breakdown: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_iters`-step Lanczos with full reorthogonalisation from a seeded
/// Gaussian start vector.
pub fn lanczos(oracle: &mut dyn HvpOracle, k: usize, max_iters: usize, seed: u64) -> Result<LanczosResult> {
    let n = oracle.dim();
    if k == 0 || k > max_iters || max_iters > n {
        return Err(Error::Usage(format!("lanczos needs 1 <= k ({k}) <= max_iters ({max_iters}) <= dim ({n})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    oracle.project(&mut q);
    let qn = dot(&q, &q).sqrt();
    if qn == 0.0 {
        return Err(Error::Usage("start vector vanished under projection".into()));
    }
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut alpha = Vec::with_capacity(max_iters);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iters);
    let mut breakdown = false;
    for j in 0..max_iters {
        let mut w = oracle.apply(&q)?;
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        beta.push(b);
        if b < BREAKDOWN {
            breakdown = j + 1 < max_iters;
            break;
        }
        if j + 1 == max_iters {
            break;
        }
        q = w.into_iter().map(|x| x / b).collect();
    }

    let m = alpha.len();
    let (vals, vecs) = tql2(&alpha, &beta[..m - 1])?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    order.truncate(k);
    let last_beta = beta[m - 1];
    let mut out = LanczosResult {
        eigenvalues: Vec::new(),
        residuals: Vec::new(),
        vectors: Vec::new(),
        iterations: m,
        breakdown,
    };
    for &c in &order {
        let s: Vec<f64> = (0..m).map(|r| vecs[r * m + c]).collect();
        let sign = if s[0] < 0.0 { -1.0 } else { 1.0 };
        let mut y = vec![0.0; n];
        for (qj, &sj) in basis.iter().zip(&s) {
            y.iter_mut().zip(qj).for_each(|(o, x)| *o += sign * sj * x);
        }
        out.eigenvalues.push(vals[c]);
        out.residuals.push((last_beta * s[m - 1]).abs());
        out.vectors.push(y);
    }
    Ok(out)
}
