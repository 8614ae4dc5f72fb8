//! Dense tensors with reverse-mode differentiation.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, GradCheckReport};
pub use params::{ParamId, ParamKind, ParameterStore};
pub use tape::{Tape, Var};
pub use tensor::{stable_sigmoid, Tensor};
