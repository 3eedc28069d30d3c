//! Sequence labelling with character-language-model string embeddings.
//!
//! The crate covers the whole pipeline: character LM pretraining and
//! continued pretraining ([`charlm`]), contextual / pooled / static / external
//! token embedders and their stacking ([`embeddings`]), a BiLSTM-CRF tagger
//! ([`tagger`]), exact-span evaluation ([`eval`]) and the experiment runner
//! ([`study`]). Everything numeric is generic over [`Scalar`] (`f32`/`f64`).

mod binio;
pub mod charlm;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod scalar;
pub mod study;
pub mod synthetic;
pub mod tagger;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use scalar::{Precision, Scalar};

/// Deployment scalar: 64-bit unless built with the `f32` feature.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
