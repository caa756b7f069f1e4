//! Generative photomosaics.
//!
//! A reference image is cut into a `2^L × 2^L` grid and every cell is
//! replaced by a tile sampled from a diffusion model. Three mechanisms keep
//! the tiles faithful to the reference:
//!
//! - [`noise`]: all tile latents are expanded from one coarse Gaussian field
//!   so their block integrals follow the reference grid;
//! - [`guidance::adain_align`]: at every step the tile's clean-image estimate
//!   takes on the block's per-channel mean and standard deviation;
//! - [`guidance::guidance_gradient`]: gradient descent on the latent pulls the
//!   blurred estimate toward the blurred block.
//!
//! The diffusion model is a closed-form posterior-mean denoiser over a small
//! exemplar pool ([`diffusion::ExemplarDenoiser`]) so everything runs on a
//! CPU in seconds. [`classic`] has the match-and-tone baseline and
//! [`metrics`] the fidelity metrics used to compare them.

pub mod classic;
pub mod diffusion;
mod error;
pub mod guidance;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use image::ImageBuffer;

/// Guide chapters, compiled as doc-tests so their snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/guidance.md")]
    mod guidance {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/classic.md")]
    mod classic {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
