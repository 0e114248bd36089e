use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::confidence::{emergence_step, probe_confidence, ProbeReport};
use super::dataset::{hidden_rows, LabelSet, ProbeDataset, DECODER_STACK};
use super::logreg::{train_probe, ProbeModel};
use crate::model::mix;
use crate::report::{fmt_num, CsvLog};
use crate::trainer::{AnalysisEvent, AnalysisHook};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub threshold: f64,
    pub patience: usize,
}

/// Fits (or applies a pinned) probe per decoder layer at every event and
/// logs per-label confidence to `metrics/probes_decoder<L>_<set>.csv`.
pub struct ProbeHook {
    name: String,
    label_set: LabelSet,
    settings: ProbeSettings,
    frozen: BTreeMap<usize, ProbeModel>,
    logs: Vec<CsvLog>,
    history: Vec<BTreeMap<String, Vec<(u64, f64)>>>,
    latest: Vec<Option<ProbeReport>>,
}

impl ProbeHook {
    pub fn new(
        run_dir: &Path,
        label_set: LabelSet,
        layers: usize,
        settings: ProbeSettings,
        frozen: BTreeMap<usize, ProbeModel>,
    ) -> Result<ProbeHook> {
        if let Some(&l) = frozen.keys().find(|&&l| l >= layers) {
            return Err(Error::Compatibility(format!("pinned probe for layer {l}, model has {layers} layers")));
        }
        let logs = (0..layers)
            .map(|l| {
                let path = run_dir.join(format!("metrics/probes_{DECODER_STACK}{l}_{label_set}.csv"));
                CsvLog::create(&path, &["step", "label", "confidence", "accuracy", "count"])
            })
            .collect::<Result<_>>()?;
        Ok(ProbeHook {
            name: format!("probes_{label_set}"),
            label_set,
            settings,
            frozen,
            logs,
            history: vec![BTreeMap::new(); layers],
            latest: vec![None; layers],
        })
    }

    pub fn latest(&self, layer: usize) -> Option<&ProbeReport> {
        self.latest.get(layer).and_then(Option::as_ref)
    }

    /// Emergence step per label for one layer under the hook's threshold and
    /// patience. Events without a confidence value count as below threshold.
    pub fn emergence(&self, layer: usize) -> BTreeMap<String, Option<u64>> {
        self.history[layer]
            .iter()
            .map(|(label, series)| {
                let s = emergence_step(series, self.settings.threshold, self.settings.patience);
                (label.clone(), s)
            })
            .collect()
    }
}

impl AnalysisHook for ProbeHook {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> Result<()> {
        let data = event.data;
        let acts = event.activations()?;
        let fit: HashSet<usize> = data.probe_train.iter().copied().collect();
        let score: HashSet<usize> = data.probe_eval.iter().copied().collect();
        for layer in 0..self.logs.len() {
            let rows = hidden_rows(&data.batches, &acts.batches, layer)?;
            let train = ProbeDataset::from_rows(&rows, &data.sentences, layer, self.label_set, |s| fit.contains(&s));
            let eval = ProbeDataset::from_rows(&rows, &data.sentences, layer, self.label_set, |s| score.contains(&s));
            let probe = match self.frozen.get(&layer) {
                Some(p) => Ok(p.clone()),
                None => {
                    let seed = mix(mix(self.settings.seed, event.step), layer as u64);
                    train_probe(&train, self.settings.epochs, self.settings.learning_rate, seed)
                }
            };
            let report = match probe {
                Ok(p) => probe_confidence(&p, &eval, event.step)?,
                Err(e @ Error::Degenerate(_)) => {
                    log::warn!("step {}: layer {layer} {} probe skipped: {e}", event.step, self.label_set);
                    ProbeReport {
                        step: event.step,
                        labels: Vec::new(),
                    }
                }
                Err(e) => return Err(e),
            };
            let mut rows_out = Vec::new();
            for label in self.label_set.labels() {
                let stats = report.get(&label);
                let conf = stats.and_then(|s| s.confidence);
                rows_out.push([
                    event.step.to_string(),
                    label.clone(),
                    fmt_num(conf),
                    fmt_num(stats.and_then(|s| s.accuracy)),
                    stats.map_or(0, |s| s.count).to_string(),
                ]);
                self.history[layer]
                    .entry(label)
                    .or_default()
                    .push((event.step, conf.unwrap_or(f64::NAN)));
            }
            self.logs[layer].append_all(&rows_out)?;
            self.latest[layer] = Some(report);
        }
        Ok(())
    }

    fn outputs(&self) -> Vec<PathBuf> {
        self.logs.iter().map(|l| l.path().to_path_buf()).collect()
    }

    fn summary(&self) -> Value {
        let mut out = Map::new();
        for layer in 0..self.logs.len() {
            let emergence = self.emergence(layer);
            let mut labels = Map::new();
            for (label, step) in emergence {
                let conf = self.latest(layer).and_then(|r| r.get(&label)).and_then(|s| s.confidence);
                labels.insert(label, json!({ "emergence_step": step, "confidence": conf }));
            }
            out.insert(format!("{DECODER_STACK}{layer}"), Value::Object(labels));
        }
        Value::Object(out)
    }
}
