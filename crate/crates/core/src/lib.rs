//! Multi-task training of a recommender and a knowledge-graph-embedding
//! model bridged by cross&compress units.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod scalar;
pub mod theory;
pub mod training;
pub mod units;

pub use error::{MkrError, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type ParameterStore = autodiff::ParameterStore<f64>;
pub type MkrModel = model::MkrModel<f64>;
