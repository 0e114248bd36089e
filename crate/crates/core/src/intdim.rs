//! Intrinsic dimension of hidden-state clouds: TwoNN and PCA estimators and a
//! per-layer report.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{mix, Batch, DecoderModel, Inference};
use crate::probes::hidden_rows;
use crate::report::{fmt_num, CsvLog};
use crate::trainer::{Activations, AnalysisEvent, AnalysisHook};
use crate::{Error, Result};

pub const MIN_POINTS: usize = 20;
pub const DEFAULT_DISCARD: f64 = 0.1;
pub const DEFAULT_VARIANCE: f64 = 0.95;
pub const MAX_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdMethod {
    TwoNN,
    #[serde(rename = "PCA")]
    Pca,
}

impl fmt::Display for IdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdMethod::TwoNN => "TwoNN",
            IdMethod::Pca => "PCA",
        })
    }
}

/// `n` points of dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(d: usize, data: Vec<f64>) -> Result<PointCloud> {
        if d == 0 || !data.len().is_multiple_of(d) {
            return Err(Error::Data(format!("{} values do not form rows of width {d}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("point cloud contains non-finite values".into()));
        }
        Ok(PointCloud { n: data.len() / d, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<PointCloud> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data("ragged point rows".into()));
        }
        PointCloud::new(d, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// First occurrence of every distinct row, in order.
    pub fn deduplicated(&self) -> PointCloud {
        let mut seen = HashSet::new();
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            let key: Vec<u64> = self.row(i).iter().map(|v| (v + 0.0).to_bits()).collect();
            if seen.insert(key) {
                data.extend_from_slice(self.row(i));
            }
        }
        PointCloud {
            n: data.len() / self.d,
            d: self.d,
            data,
        }
    }

    /// Rows that repeat an earlier row.
    pub fn duplicate_count(&self) -> usize {
        self.n - self.deduplicated().n
    }

    /// Seeded sample of at most `cap` rows without replacement, kept in
    /// original order.
    pub fn subsample(&self, cap: usize, seed: u64) -> PointCloud {
        if self.n <= cap {
            return self.clone();
        }
        let mut idx = rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), self.n, cap).into_vec();
        idx.sort_unstable();
        PointCloud {
            n: cap,
            d: self.d,
            data: idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

/// Squared distances from each point to its two nearest distinct neighbours.
fn two_nearest(c: &PointCloud) -> Vec<(f64, f64)> {
    let mut best = vec![(f64::INFINITY, f64::INFINITY); c.n];
    for i in 0..c.n {
        let xi = c.row(i);
        for j in i + 1..c.n {
            let d2: f64 = xi.iter().zip(c.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 == 0.0 {
                continue;
            }
            for k in [i, j] {
                let b = &mut best[k];
                if d2 < b.0 {
                    *b = (d2, b.0);
                } else if d2 < b.1 {
                    b.1 = d2;
                }
            }
        }
    }
    best
}

/// Nearest-neighbour distance ratios `μ = r2/r1`, one per distinct point.
pub fn twonn_ratios(points: &PointCloud) -> Result<Vec<f64>> {
    if points.n < MIN_POINTS {
        return Err(Error::SampleSize { needed: MIN_POINTS, got: points.n });
    }
    let c = points.deduplicated();
    if c.n < 2 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    if c.n < MIN_POINTS {
        return Err(Error::SampleSize { needed: MIN_POINTS, got: c.n });
    }
    Ok(two_nearest(&c)
        .into_iter()
        .map(|(r1, r2)| (r2 / r1).sqrt())
        .collect())
}

/// Maximum-likelihood TwoNN estimate from ratios, treating the largest
/// `discard_fraction` as right-censored at the largest retained ratio.
pub fn twonn_from_ratios(mu: &[f64], discard_fraction: f64) -> Result<f64> {
    let mut mu = mu.to_vec();
    mu.sort_by(f64::total_cmp);
    let n = mu.len();
    let m = n - ((n as f64 * discard_fraction).floor() as usize).min(n - 1);
    let cut = mu[m - 1].ln();
    let denom: f64 = mu[..m].iter().map(|x| x.ln()).sum::<f64>() + (n - m) as f64 * cut;
    if denom <= 0.0 {
        return Err(Error::Degenerate("neighbour distance ratios are all 1".into()));
    }
    Ok(m as f64 / denom)
}

/// TwoNN intrinsic dimension. Exact duplicate rows are collapsed first.
pub fn twonn_estimate(points: &PointCloud, discard_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::Usage(format!("discard_fraction must lie in [0, 1), got {discard_fraction}")));
    }
    twonn_from_ratios(&twonn_ratios(points)?, discard_fraction)
}

/// Covariance eigenvalues in descending order, clamped at zero.
pub fn covariance_spectrum(points: &PointCloud) -> Result<Vec<f64>> {
    if points.n < 2 {
        return Err(Error::SampleSize { needed: 2, got: points.n });
    }
    let x = DMatrix::from_row_slice(points.n, points.d, &points.data);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(points.n, points.d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (points.n - 1) as f64;
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Smallest number of principal components explaining at least
/// `variance_threshold` of the total variance.
pub fn pca_estimate(points: &PointCloud, variance_threshold: f64) -> Result<usize> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::Usage(format!("variance threshold must lie in (0, 1], got {variance_threshold}")));
    }
    let ev = covariance_spectrum(points)?;
    let total: f64 = ev.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("point cloud has zero variance".into()));
    }
    let mut acc = 0.0;
    for (k, v) in ev.iter().enumerate() {
        acc += v;
        if acc >= variance_threshold * total {
            return Ok(k + 1);
        }
    }
    Ok(ev.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdLayer {
    Layer(usize),
    Avg,
}

impl fmt::Display for IdLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdLayer::Layer(l) => write!(f, "{l}"),
            IdLayer::Avg => f.write_str("AVG"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdRecord {
    pub step: u64,
    pub layer: IdLayer,
    pub method: IdMethod,
    /// `None` when the estimator failed on this cloud.
    pub estimate: Option<f64>,
    pub count: usize,
}

fn estimate(cloud: &PointCloud, method: IdMethod) -> Result<f64> {
    match method {
        IdMethod::TwoNN => twonn_estimate(cloud, DEFAULT_DISCARD),
        IdMethod::Pca => pca_estimate(cloud, DEFAULT_VARIANCE).map(|k| k as f64),
    }
}

/// Per-layer estimates over non-padding token states (at most
/// [`MAX_ROWS`] per layer, subsampled with a seed derived from `seed` and the
/// layer) followed by their mean as the `AVG` record.
pub fn id_records(
    batches: &[Batch],
    outputs: &[Inference],
    method: IdMethod,
    seed: u64,
    step: u64,
) -> Result<Vec<IdRecord>> {
    let layers = outputs.first().map_or(0, |o| o.hidden.len());
    let mut records = Vec::with_capacity(layers + 1);
    for layer in 0..layers {
        let rows = hidden_rows(batches, outputs, layer)?;
        let cloud = PointCloud::new(rows.dim, rows.features)?.subsample(MAX_ROWS, mix(seed, layer as u64));
        let est = estimate(&cloud, method);
        if let Err(e) = &est {
            log::warn!("step {step}: intrinsic dimension of layer {layer} unavailable: {e}");
        }
        records.push(IdRecord {
            step,
            layer: IdLayer::Layer(layer),
            method,
            estimate: est.ok(),
            count: cloud.len(),
        });
    }
    let vals: Option<Vec<f64>> = records.iter().map(|r| r.estimate).collect();
    records.push(IdRecord {
        step,
        layer: IdLayer::Avg,
        method,
        estimate: vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64),
        count: records.iter().map(|r| r.count).sum(),
    });
    Ok(records)
}

/// Runs `model` over `batches` and reports per-layer and average ID.
pub fn layer_id_report(
    model: &DecoderModel,
    batches: &[Batch],
    method: IdMethod,
    seed: u64,
    step: u64,
) -> Result<Vec<IdRecord>> {
    if batches.iter().all(|b| b.rows == 0) {
        return Err(Error::Usage("layer_id_report needs a non-empty batch".into()));
    }
    let acts = Activations::compute(model, batches)?;
    id_records(batches, &acts.batches, method, seed, step)
}

/// Writes `metrics/intdim.csv` (step,layer,method,estimate,count).
pub struct IntDimHook {
    method: IdMethod,
    seed: u64,
    log: CsvLog,
    latest: Vec<IdRecord>,
}

impl IntDimHook {
    pub fn new(run_dir: &Path, method: IdMethod, seed: u64) -> Result<IntDimHook> {
        let log = CsvLog::create(
            &run_dir.join("metrics/intdim.csv"),
            &["step", "layer", "method", "estimate", "count"],
        )?;
        Ok(IntDimHook {
            method,
            seed,
            log,
            latest: Vec::new(),
        })
    }
}

impl AnalysisHook for IntDimHook {
    fn name(&self) -> &str {
        "intdim"
    }

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> Result<()> {
        let acts = event.activations()?;
        let records = id_records(&event.data.batches, &acts.batches, self.method, self.seed, event.step)?;
        let rows: Vec<[String; 5]> = records
            .iter()
            .map(|r| {
                [
                    r.step.to_string(),
                    r.layer.to_string(),
                    r.method.to_string(),
                    fmt_num(r.estimate),
                    r.count.to_string(),
                ]
            })
            .collect();
        self.log.append_all(&rows)?;
        self.latest = records;
        Ok(())
    }

    fn outputs(&self) -> Vec<PathBuf> {
        vec![self.log.path().to_path_buf()]
    }

    fn summary(&self) -> Value {
        let by_layer: serde_json::Map<String, Value> = self
            .latest
            .iter()
            .map(|r| (r.layer.to_string(), json!(r.estimate)))
            .collect();
        json!({ "method": self.method.to_string(), "step": self.latest.first().map(|r| r.step), "estimates": by_layer })
    }
}
