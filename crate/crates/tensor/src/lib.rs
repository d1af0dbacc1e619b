//! Dense `f32`/`f64` tensors, volumetric kernels and a small reverse-mode
//! autodiff tape, sized for training 3-D segmentation networks on a CPU.
//!
//! Kernels cover exactly what a 3-D U-Net and a fully convolutional critic
//! need: stride-1 cubic convolutions, group and batch normalization, 2x max
//! pooling, 2x trilinear upsampling, channel concatenation, activations, and
//! the scalar objectives used for training.

pub mod element;
pub mod graph;
pub mod kernels;
pub mod params;
pub mod tensor;

pub use element::Element;
pub use graph::{BatchMoments, BatchNormMode, Bound, Eager, Gradients, Graph, Tape, Var};
pub use params::ParamStore;
pub use tensor::{Result, Tensor, TensorError};
