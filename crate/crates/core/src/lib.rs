//! Universal graph embeddings.
//!
//! A moment-based graph encoder shared across datasets, a decoder that
//! reconstructs adjacency matrices and graph-kernel similarities, and a
//! trainer for pretraining, fine-tuning and k-fold cross-validation. The
//! guide under `book/` walks through each part.

pub mod autodiff;
pub(crate) mod codec;
pub mod data;
pub mod decoder;
pub mod eigen;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod matrix;
pub mod model;
pub mod params;
pub mod rng;
pub mod train;

pub use error::{Error, Result};

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
