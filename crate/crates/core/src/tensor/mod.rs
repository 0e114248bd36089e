//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every forward operation applied to [`Var`] handles and
//! replays the vector-Jacobian rules in reverse on [`Var::backward`]. Storage
//! is generic over [`Real`]: `f32` is the default training precision and `f64`
//! is used for gradient checks and curvature analysis.

pub mod gradcheck;
mod ops;
mod real;
mod tape;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use real::Real;
pub use tape::{Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension error in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("dimension error: expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid argument to {op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalar(Vec<usize>),
    #[error("tape already consumed by a previous backward pass")]
    Consumed,
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
}

/// Storage precision selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    /// `TRACE_PRECISION=f64` overrides whatever a config asks for.
    pub fn from_env_or(self) -> Precision {
        match std::env::var("TRACE_PRECISION").as_deref() {
            Ok("f64") | Ok("64") => Precision::F64,
            Ok("f32") | Ok("32") => Precision::F32,
            _ => self,
        }
    }
}

/// Non-finite checks run after every forward op when `TRACE_DEBUG=1`.
pub fn numeric_checks_enabled() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        matches!(
            std::env::var("TRACE_DEBUG").as_deref(),
            Ok("1") | Ok("true")
        )
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::Length {
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self, TensorError> {
        Self::new(shape, data.iter().map(|&x| T::of(x)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.f64()).collect()
    }

    /// Single value of a scalar (or one-element) tensor.
    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self, TensorError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(TensorError::Shape {
                op: "reshape",
                left: self.shape,
                right: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
