//! Dense `f64` tensors, a define-by-run differentiation tape, the Adam
//! optimizer and a seedable RNG.

mod adam;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use rng::SeedRng;
pub use tape::{Gradients, Tape, Var, NORM_EPSILON};
pub use tensor::{visit_prefixed, visit_prefixed_mut, Parameterized, Tensor, TensorId};
