use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hvp::HvpOracle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub mean: f64,
    /// Standard error of the mean; NaN with a single probe.
    pub stderr: f64,
    pub probes: usize,
}

/// Hutchinson trace estimate `mean(zᵀHz)` over Rademacher probes `z`.
pub fn hutchinson_trace(oracle: &mut dyn HvpOracle, n_probes: usize, seed: u64) -> Result<TraceEstimate> {
    if n_probes == 0 {
        return Err(Error::Usage("hutchinson_trace needs at least one probe".into()));
    }
    let n = oracle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let mut z: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        oracle.project(&mut z);
        let hz = oracle.apply(&z)?;
        samples.push(z.iter().zip(&hz).map(|(a, b)| a * b).sum::<f64>());
    }
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let stderr = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(TraceEstimate {
        mean,
        stderr,
        probes: samples.len(),
    })
}
