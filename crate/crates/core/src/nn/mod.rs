//! A small hand-differentiated tensor engine in 64-bit floats.
//!
//! Every layer exposes a forward function and a backward function returning
//! exact gradients; there is no autodiff graph. Convolutions use
//! cross-correlation semantics (no kernel flip) with zero padding.

mod activation;
mod adam;
mod conv;
mod gradcheck;
mod loss;
mod pool;
mod tensor;

pub use activation::{relu, relu_backward};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{
    bilinear_kernel, bilinear_weights_1d, conv2d, conv2d_backward, conv_output_size, transposed_conv2d,
    transposed_conv2d_backward, transposed_output_size, ConvGrads, ConvParams,
};
pub use gradcheck::{grad_check, relative_error};
pub use loss::{softmax, softmax_cross_entropy, LossOutput};
pub use pool::{maxpool2, maxpool2_backward, PoolIndices};
pub use tensor::Tensor4;
