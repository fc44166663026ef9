//! From-scratch differentiable building blocks.

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod network;
pub mod tensor;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use gradcheck::{compare_gradients, gradient_check, GradCheckReport};
pub use lstm::{lstm_step, CellActivation, LstmParams};
pub use network::{cross_entropy, softmax, FeatureMode, ForwardCache, Network, NetworkSpec};
pub use tensor::Tensor;
