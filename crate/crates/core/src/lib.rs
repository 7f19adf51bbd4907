//! Light convolutional autoencoder for single-image dehazing.

pub mod error;
pub mod gradcheck;
pub mod hazegen;
pub mod imageio;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod reference;
mod linalg;
pub mod tensor;

pub use error::{CheckpointError, Error, ImageError, Result};
pub use model::{Gradients, Model, ParamSet, StackCache};
pub use tensor::{BinaryOp, Precision, Real, Tensor};
