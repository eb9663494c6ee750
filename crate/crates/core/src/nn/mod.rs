//! From-scratch differentiable building blocks: layers with hand-written
//! backward passes, losses, optimizers and a finite-difference checker.

pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use dense::{DenseNet, DenseProbe};
pub use gradcheck::{grad_check, grad_check_resampling, GradCheckReport, GradCheckable};
pub use layers::{
    conv1d_backward, conv1d_forward, fully_connected, fully_connected_backward, maxpool1d, maxpool1d_backward,
    maxpool1d_with_indices, relu, softmax, softmax_backward, transposed_conv1d_backward, transposed_conv1d_forward,
    upsample1d, upsample1d_backward, LayerKind, LayerParams,
};
pub use loss::{cross_entropy, mse};
pub use optim::{adam_step, AdamState, Optimizer, OptimizerKind};
pub use tensor::Tensor3;
