//! Synthetic annotated corpora and training-time interpretability analysis
//! for small decoder-only transformers.
//!
//! The crate is organised around a hook bus: [`trainer`] runs the optimisation
//! loop and, every `track_interval` steps, hands a frozen parameter snapshot to
//! each enabled analysis module ([`probes`], [`intdim`], [`hessian`],
//! [`diagnose`]). Every module writes CSV rows into the run directory, and
//! [`report`] turns those into deterministic SVG charts.
//!
//! Training data comes from [`corpusgen`], which builds sentences from semantic
//! frames with Zipf-distributed lexical pools and records POS tags, positioned
//! semantic roles, and per-sentence metadata.

pub mod corpusgen;
pub mod diagnose;
pub mod error;
pub mod hessian;
pub mod intdim;
pub mod model;
pub mod probes;
pub mod report;
pub mod tensor;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
