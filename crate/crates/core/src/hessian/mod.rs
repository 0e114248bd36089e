//! Loss-curvature analysis: finite-difference Hessian-vector products,
//! Lanczos top eigenvalues, Hutchinson trace, gradient alignment,
//! component-restricted spectra and train/validation divergence.

mod hook;
mod hvp;
mod lanczos;
mod spectrum;
mod trace;

pub use hook::{HessianHook, HessianSettings};
pub use hvp::{default_eps_scale, hvp, DenseOracle, HvpOracle, ModelOracle};
pub use lanczos::{lanczos, tql2, LanczosResult};
pub use spectrum::{
    component_label, component_spectrum, divergence, gradient_alignment, landscape_divergence, CurvatureSplit,
    SpectrumRecord, SpectrumSettings,
};
pub use trace::{hutchinson_trace, TraceEstimate};
