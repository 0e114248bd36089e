use serde::Serialize;

use super::dataset::ProbeDataset;
use super::logreg::ProbeModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStats {
    pub label: String,
    /// Mean probability given to the gold label; `None` without samples.
    pub confidence: Option<f64>,
    pub accuracy: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub step: u64,
    pub labels: Vec<LabelStats>,
}

impl ProbeReport {
    pub fn get(&self, label: &str) -> Option<&LabelStats> {
        self.labels.iter().find(|l| l.label == label)
    }
}

/// Running mean; exact when every value is identical.
#[derive(Default, Clone, Copy)]
struct Mean {
    n: usize,
    m: f64,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.m += (x - self.m) / self.n as f64;
    }

    fn get(self) -> Option<f64> {
        (self.n > 0).then_some(self.m)
    }
}

/// Per-label gold-class confidence and argmax accuracy of `probe` on `ds`.
pub fn probe_confidence(probe: &ProbeModel, ds: &ProbeDataset, step: u64) -> Result<ProbeReport> {
    if probe.labels != ds.label_names || probe.d_model != ds.dim {
        return Err(Error::Compatibility(format!(
            "probe ({} labels, d_model {}) does not match dataset ({} labels, dim {})",
            probe.labels.len(),
            probe.d_model,
            ds.label_names.len(),
            ds.dim
        )));
    }
    let k = probe.num_labels();
    let mut conf = vec![Mean::default(); k];
    let mut acc = vec![Mean::default(); k];
    for (i, &y) in ds.labels.iter().enumerate() {
        let p = probe.probabilities(ds.row(i));
        let arg = p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (j, &v)| if v > a.1 { (j, v) } else { a })
            .0;
        conf[y].push(p[y]);
        acc[y].push(if arg == y { 1.0 } else { 0.0 });
    }
    let labels = probe
        .labels
        .iter()
        .enumerate()
        .map(|(j, name)| LabelStats {
            label: name.clone(),
            confidence: conf[j].get(),
            accuracy: acc[j].get(),
            count: conf[j].n,
        })
        .collect();
    Ok(ProbeReport { step, labels })
}

/// Earliest step whose confidence, and that of the next `patience - 1`
/// entries, is at least `threshold`.
pub fn emergence_step(series: &[(u64, f64)], threshold: f64, patience: usize) -> Option<u64> {
    let patience = patience.max(1);
    series
        .windows(patience)
        .find(|w| w.iter().all(|&(_, c)| c >= threshold))
        .map(|w| w[0].0)
}
