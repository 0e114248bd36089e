use std::cell::OnceCell;
use std::path::PathBuf;

use serde_json::Value;

use super::data::AnalysisData;
use crate::model::{Batch, DecoderModel, Inference};
use crate::Result;

/// A tracking event: a frozen parameter snapshot plus the shared analysis
/// inputs. Activations over the analysis sentences are computed at most once
/// per event and shared by every hook.
pub struct AnalysisEvent<'a> {
    pub step: u64,
    pub model: &'a DecoderModel,
    pub train_loss: Option<f64>,
    pub batch: Option<&'a Batch>,
    pub data: &'a AnalysisData,
    activations: OnceCell<Activations>,
}

impl<'a> AnalysisEvent<'a> {
    pub fn new(
        step: u64,
        model: &'a DecoderModel,
        train_loss: Option<f64>,
        batch: Option<&'a Batch>,
        data: &'a AnalysisData,
    ) -> Self {
        AnalysisEvent {
            step,
            model,
            train_loss,
            batch,
            data,
            activations: OnceCell::new(),
        }
    }

    pub fn activations(&self) -> Result<&Activations> {
        if let Some(a) = self.activations.get() {
            return Ok(a);
        }
        let a = Activations::compute(self.model, &self.data.batches)?;
        Ok(self.activations.get_or_init(|| a))
    }
}

/// Evaluation-mode forward results for each analysis batch.
#[derive(Debug, Clone)]
pub struct Activations {
    pub batches: Vec<Inference>,
}

impl Activations {
    pub fn compute(model: &DecoderModel, batches: &[Batch]) -> Result<Activations> {
        let batches = batches
            .iter()
            .map(|b| model.infer(&b.inputs, b.rows, b.len))
            .collect::<Result<_, _>>()?;
        Ok(Activations { batches })
    }
}

/// An analysis module attached to the training loop.
pub trait AnalysisHook {
    fn name(&self) -> &str;

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> Result<()>;

    /// Files this hook has written so far.
    fn outputs(&self) -> Vec<PathBuf>;

    /// JSON summary of the latest state, mirrored into `summary.json`.
    fn summary(&self) -> Value {
        Value::Null
    }
}
