//! Adam training loop, validation, checkpoints, and the analysis hook bus.
//!
//! Every `track_interval` steps the trainer clones the model, writes
//! `checkpoints/step_<N>.ckpt`, and passes the clone to each attached
//! [`AnalysisHook`] in turn. Hooks run synchronously, so the training
//! parameters cannot change while an analysis is in progress.

mod adam;
mod config;
mod data;
mod early_stop;
mod hooks;
mod run;

pub use adam::{adam_step, AdamState};
pub use config::{parse_probe_key, EarlyStopConfig, Preset, StopMetric, TrainingConfig};
pub use data::{fixed_batches, AnalysisData, Loader, Split};
pub use early_stop::EarlyStopper;
pub use hooks::{Activations, AnalysisEvent, AnalysisHook};
pub use run::{default_hooks, evaluate, run_training, score_logits, EvalMetrics, TrainReport, Trainer};
