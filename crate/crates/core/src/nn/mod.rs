//! A small reverse-mode neural network engine: dense and 2-D convolution
//! layers, pooling, activations, Adam and the two training losses.
//!
//! All tensors are batch-major and row-major. Convolutions run as im2col
//! followed by a matrix product.

mod adam;
mod layer;
mod loss;
mod network;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layer::Layer;
pub use loss::{margin_ranking_loss, mse_loss};
pub use network::{Gradients, Network, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch at layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    TensorShape { shape: Vec<usize>, len: usize },
    #[error("tape was recorded for different weights")]
    StaleTape,
    #[error("non-finite gradient in parameter {0}")]
    NonFinite(usize),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("{0}")]
    Mismatch(String),
}
