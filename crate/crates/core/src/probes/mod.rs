//! Linear probes that decode POS tags and semantic roles from hidden states.
//!
//! A probe is a softmax-linear map fitted by full-batch gradient descent on
//! standardised features. Its confidence for a label is the mean probability
//! it assigns to the gold label over tokens bearing that label. Role probes
//! include a `NONE` label for positions without a role.

mod confidence;
mod dataset;
mod hook;
mod io;
mod logreg;

pub use confidence::{emergence_step, probe_confidence, LabelStats, ProbeReport};
pub use dataset::{collect_probe_dataset, hidden_rows, HiddenRows, LabelSet, ProbeDataset, DECODER_STACK, NONE_LABEL};
pub use hook::{ProbeHook, ProbeSettings};
pub use io::{load_probe, save_probe};
pub use logreg::{fit_probe, train_probe, ProbeModel, WEIGHT_DECAY};
