use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::spectrum::{component_spectrum, landscape_divergence, CurvatureSplit, SpectrumRecord, SpectrumSettings};
use crate::model::{mix, Component};
use crate::report::{fmt_num, CsvLog};
use crate::trainer::{AnalysisEvent, AnalysisHook};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSettings {
    pub k: usize,
    pub probes: usize,
    pub alignment: bool,
    pub components: bool,
    pub seed: u64,
    pub eps_scale: Option<f64>,
}

/// Writes `metrics/hessian.csv`: one row per (split, component) per event.
pub struct HessianHook {
    settings: HessianSettings,
    log: CsvLog,
    latest: Vec<SpectrumRecord>,
}

impl HessianHook {
    pub fn new(run_dir: &Path, settings: HessianSettings) -> Result<HessianHook> {
        let mut header = vec!["step".to_string(), "split".into(), "component".into()];
        header.extend((1..=settings.k).map(|i| format!("lambda_{i}")));
        header.extend(["trace", "trace_stderr", "grad_norm", "grad_alignment", "divergence"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let log = CsvLog::create(&run_dir.join("metrics/hessian.csv"), &header)?;
        Ok(HessianHook {
            settings,
            log,
            latest: Vec::new(),
        })
    }

    pub fn latest(&self) -> &[SpectrumRecord] {
        &self.latest
    }

    fn row(&self, r: &SpectrumRecord, div: Option<f64>) -> Vec<String> {
        let mut row = vec![r.step.to_string(), r.split.to_string(), r.component.clone()];
        row.extend((0..self.settings.k).map(|i| fmt_num(r.eigenvalues.get(i).copied())));
        row.extend([
            fmt_num(Some(r.trace)),
            fmt_num(Some(r.trace_stderr)),
            fmt_num(Some(r.grad_norm)),
            fmt_num(r.grad_alignment),
            fmt_num(div),
        ]);
        row
    }
}

impl AnalysisHook for HessianHook {
    fn name(&self) -> &str {
        "hessian"
    }

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> Result<()> {
        let data = event.data;
        let mut components = vec![None];
        if self.settings.components {
            components.extend(Component::ALL.map(Some));
        }
        let splits: Vec<_> = [
            (CurvatureSplit::Train, Some(&data.curvature_train)),
            (CurvatureSplit::Val, data.curvature_val.as_ref()),
        ]
        .into_iter()
        .filter_map(|(s, b)| b.map(|b| (s, b)))
        .collect();
        let mut rows = Vec::new();
        let mut latest = Vec::new();
        for (ci, &component) in components.iter().enumerate() {
            let settings = SpectrumSettings {
                k: self.settings.k,
                max_iters: None,
                probes: self.settings.probes,
                seed: mix(self.settings.seed, ci as u64),
                eps_scale: self.settings.eps_scale,
                alignment: self.settings.alignment,
            };
            let recs = splits
                .iter()
                .map(|&(split, batch)| component_spectrum(event.model, batch, component, &settings, event.step, split))
                .collect::<Result<Vec<_>>>()?;
            let div = match recs.as_slice() {
                [t, v] => landscape_divergence(t, v)?,
                _ => None,
            };
            rows.extend(recs.iter().map(|r| self.row(r, div)));
            latest.extend(recs);
        }
        self.log.append_all(&rows)?;
        self.latest = latest;
        Ok(())
    }

    fn outputs(&self) -> Vec<PathBuf> {
        vec![self.log.path().to_path_buf()]
    }

    fn summary(&self) -> Value {
        json!(self
            .latest
            .iter()
            .map(|r| json!({
                "split": r.split,
                "component": r.component,
                "lambda_1": r.eigenvalues.first(),
                "trace": r.trace,
                "grad_alignment": r.grad_alignment,
            }))
            .collect::<Vec<_>>())
    }
}
