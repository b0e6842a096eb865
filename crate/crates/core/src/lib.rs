//! Adversarial attacks and adversarial-training defenses for a small
//! single-input single-output dehazing network.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: 4-D `f32` tensors and a reverse-mode tape.
//! - [`haze`]: procedural clear scenes, atmospheric-scattering haze and the
//!   binary dataset format.
//! - [`model`]: the K-estimation dehazing network, its SGD trainer and
//!   checkpoints.
//! - [`metrics`]: MSE, PSNR, windowed SSIM (plain and on-tape) and MSCN.
//! - [`attack`]: the projected sign-gradient attack and its loss variants.
//! - [`defense`]: min-max adversarial fine-tuning and A/B evaluation.

pub mod attack;
pub mod defense;
pub mod error;
pub mod haze;
pub mod image_io;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Shape, Tape, Tensor, Var};
