use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnose::Granularity;
use crate::intdim::IdMethod;
use crate::tensor::Precision;
use crate::{Error, Result};

/// Named starting points for a [`TrainingConfig`]. JSON configs pick one with
/// a `"preset"` key and override individual fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 500 epochs, lr 1e-4, batch 128.
    AppendixA,
    /// 30 epochs, lr 1e-3, batch 128, every analysis enabled.
    #[default]
    AppendixB,
    /// 70,000 steps, lr 1e-3, batch 128.
    Section4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    ValLoss,
    ValAccuracy,
    TrainLoss,
}

impl StopMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            StopMetric::ValLoss => "val_loss",
            StopMetric::ValAccuracy => "val_accuracy",
            StopMetric::TrainLoss => "train_loss",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, StopMetric::ValAccuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopConfig {
    pub metric: StopMetric,
    pub patience: usize,
    #[serde(default)]
    pub min_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub preset: Preset,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Analysis events fire when `step % track_interval == 0`.
    pub track_interval: u64,
    /// Hard cap on optimisation steps across all epochs.
    pub max_steps: Option<u64>,
    /// Fraction of the corpus held out for validation and analysis.
    pub val_fraction: f64,
    pub seed: u64,
    pub precision: Precision,

    pub track_hessian: bool,
    pub track_linguistic_probes: bool,
    pub track_semantic_probes: bool,
    pub track_intrinsic_dimensions: bool,
    pub track_pos_performance: bool,
    #[serde(alias = "track_semantic_roles")]
    pub track_semantic_roles_performance: bool,
    pub track_gradient_alignment: bool,
    pub track_component_hessian: bool,

    pub hessian_n_components: usize,
    pub hutchinson_probes: usize,
    /// Sentences in each fixed curvature batch (one per split).
    pub curvature_batch_size: usize,
    pub id_method: IdMethod,
    /// Frozen probes keyed `"<layer>:<stack>"`, e.g. `"0:decoder"`.
    pub probe_load_paths: BTreeMap<String, PathBuf>,
    pub semantic_roles_granularity: Granularity,
    pub save_visualization: bool,
    pub early_stop: Option<EarlyStopConfig>,

    pub probe_epochs: usize,
    pub probe_learning_rate: f64,
    /// Validation sentences used by probes, ID and diagnostics.
    pub analysis_sentences: usize,
    pub emergence_threshold: f64,
    pub emergence_patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::preset(Preset::AppendixB)
    }
}

impl TrainingConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = TrainingConfig {
            preset,
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 128,
            track_interval: 500,
            max_steps: None,
            val_fraction: 0.1,
            seed: 42,
            precision: Precision::F32,
            track_hessian: false,
            track_linguistic_probes: false,
            track_semantic_probes: false,
            track_intrinsic_dimensions: false,
            track_pos_performance: false,
            track_semantic_roles_performance: false,
            track_gradient_alignment: false,
            track_component_hessian: false,
            hessian_n_components: 10,
            hutchinson_probes: 20,
            curvature_batch_size: 64,
            id_method: IdMethod::TwoNN,
            probe_load_paths: BTreeMap::new(),
            semantic_roles_granularity: Granularity::Detailed,
            save_visualization: false,
            early_stop: None,
            probe_epochs: 300,
            probe_learning_rate: 1.0,
            analysis_sentences: 400,
            emergence_threshold: 0.6,
            emergence_patience: 2,
        };
        match preset {
            Preset::AppendixA => TrainingConfig {
                epochs: 500,
                learning_rate: 1e-4,
                ..base
            },
            Preset::AppendixB => TrainingConfig {
                track_hessian: true,
                track_linguistic_probes: true,
                track_semantic_probes: true,
                track_intrinsic_dimensions: true,
                track_pos_performance: true,
                track_semantic_roles_performance: true,
                track_gradient_alignment: true,
                track_component_hessian: true,
                save_visualization: true,
                ..base
            },
            Preset::Section4 => TrainingConfig {
                epochs: usize::MAX,
                max_steps: Some(70_000),
                ..base
            },
        }
    }

    /// Parses a JSON object: the `"preset"` key (default `appendix_b`) picks
    /// the base values and every other key overrides one field.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("training config: {e}")))?;
        let Value::Object(user) = value else {
            return Err(Error::Config("training config must be a JSON object".into()));
        };
        let preset: Preset = match user.get("preset") {
            Some(p) => serde_json::from_value(p.clone())
                .map_err(|e| Error::Config(format!("training config: preset: {e}")))?,
            None => Preset::default(),
        };
        let Value::Object(mut merged) = serde_json::to_value(Self::preset(preset))
            .map_err(|e| Error::Config(e.to_string()))?
        else {
            unreachable!("config serialises to an object")
        };
        for (k, v) in user {
            // Aliases must replace the canonical key, not sit beside it.
            let key = if k == "track_semantic_roles" {
                "track_semantic_roles_performance".to_string()
            } else {
                k
            };
            merged.insert(key, v);
        }
        let cfg: TrainingConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| Error::Config(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config is serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.track_interval < 1 {
            return bad("track_interval must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction));
        }
        if self.hessian_n_components < 1 || self.hutchinson_probes < 1 || self.curvature_batch_size < 1 {
            return bad("hessian_n_components, hutchinson_probes and curvature_batch_size must be positive".into());
        }
        if self.probe_epochs < 1 || self.probe_learning_rate.is_nan() || self.probe_learning_rate <= 0.0 {
            return bad("probe_epochs and probe_learning_rate must be positive".into());
        }
        if !(self.emergence_threshold > 0.0 && self.emergence_threshold < 1.0) || self.emergence_patience < 1 {
            return bad("emergence_threshold must lie in (0, 1) and emergence_patience be positive".into());
        }
        if let Some(es) = &self.early_stop {
            if es.patience < 1 || es.min_delta < 0.0 {
                return bad("early_stop needs patience >= 1 and min_delta >= 0".into());
            }
        }
        for key in self.probe_load_paths.keys() {
            parse_probe_key(key)?;
        }
        Ok(())
    }

    /// Whether any analysis module is switched on.
    pub fn any_tracking(&self) -> bool {
        self.track_hessian
            || self.track_linguistic_probes
            || self.track_semantic_probes
            || self.track_intrinsic_dimensions
            || self.track_pos_performance
            || self.track_semantic_roles_performance
            || self.track_gradient_alignment
            || self.track_component_hessian
            || !self.probe_load_paths.is_empty()
    }

    pub fn curvature_enabled(&self) -> bool {
        self.track_hessian || self.track_gradient_alignment || self.track_component_hessian
    }
}

/// Splits a probe path key `"<layer>:<stack>"`.
pub fn parse_probe_key(key: &str) -> Result<(usize, String)> {
    let err = || Error::Config(format!("probe_load_paths key {key:?} must look like \"0:decoder\""));
    let (layer, stack) = key.split_once(':').ok_or_else(err)?;
    let layer = layer.trim().parse().map_err(|_| err())?;
    let stack = stack.trim();
    if stack.is_empty() {
        return Err(err());
    }
    Ok((layer, stack.to_string()))
}
