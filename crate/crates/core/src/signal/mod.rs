//! Numerical kernel: multi-channel 1D convolution with exact backward passes,
//! activations, the Adam optimizer and finite-difference verification.
//!
//! Everything here is generic over [`Real`] so the same code can be run in
//! `f64` when checking gradients numerically. Models and training use `f32`.

mod activation;
mod adam;
mod conv;
pub mod gradcheck;
mod kernels;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_derivative, sigmoid, sigmoid_derivative, Activation};
pub use adam::{AdamConfig, AdamState};
pub use conv::{conv1d_backward, conv1d_forward, ConvGrads, ConvLayer};
pub use gradcheck::finite_difference_check;
pub use tensor::FeatureMap;

use std::fmt::Debug;

use num_traits::Float;

/// Floating point type usable by the convolution kernels.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
