//! Dense tensors, reverse-mode differentiation and optimisation.

mod activation;
pub mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use activation::{leaky_relu, log_sum_exp, relu, sigmoid, softmax, LEAKY_SLOPE};
pub use gradcheck::{finite_difference_check, GradCheckConfig, GradCheckReport};
pub use optim::Adam;
pub use tape::{Gradients, Tape, Unary, Var};
pub use tensor::{ParamId, ParamStore, Tensor};

/// Default Adam learning rate.
pub const DEFAULT_LEARNING_RATE: f64 = 5e-3;
