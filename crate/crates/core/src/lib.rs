//! Transferable learned cost models for sparse tensor program tuning.
//!
//! A cost model is pre-trained on cheap samples from a source platform and
//! fine-tuned with a handful of samples from an expensive target platform.
//! Configurations are split into a part that maps onto a shared canonical
//! loop nest and a hardware-specific part compressed by a per-platform
//! latent encoder.

pub mod matrix;
pub mod config;
pub mod oracle;
pub mod platform;
pub mod nn;
pub mod costmodel;
pub mod eval;
pub mod training;
