//! Coherent multi-scale noise.
//!
//! A coarse Gaussian field is sampled once at reference resolution. Each
//! coarse value `X` is then expanded into an `s × s` block of fine values
//! whose sum is exactly `X`: the block mean `X / N` (with `N = s²`) plus a
//! zero-sum residual built from fresh Gaussian draws. A final rescaling of
//! the residual restores the per-pixel variance a diffusion sampler expects.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{partition_blocks, ImageBuffer};

/// How the zero-sum residual of a block is scaled before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Residual `(Z - mean(Z)) / sqrt(N)`. Conditional variance per pixel is
    /// `(N - 1) / N²` before normalization.
    Literal,
    /// Residual `Z - mean(Z)`. Conditional variance per pixel is
    /// `(N - 1) / N` before normalization and exactly 1 after it.
    #[default]
    Consistent,
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "consistent" => Ok(Self::Consistent),
            other => Err(Error::invalid(
                "noise_mode",
                format!("`{other}` is not one of literal, consistent"),
            )),
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Literal => "literal",
            Self::Consistent => "consistent",
        })
    }
}

/// Coarse i.i.d. standard normal field and the seed that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseLatent {
    pub field: ImageBuffer,
    pub seed: u64,
}

impl CoarseLatent {
    pub fn sample(channels: usize, height: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field =
            ImageBuffer::from_fn(channels, height, width, |_, _, _| rng.sample(StandardNormal));
        Self { field, seed }
    }
}

/// Fine-scale noise: every `block_size × block_size` block sums to the
/// coarse value it was expanded from.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub field: ImageBuffer,
    pub block_size: usize,
    pub mode: NoiseMode,
}

/// Expands one coarse value given the `N` standard normal draws `z`.
pub fn subsample_block(x: f64, z: &[f64], mode: NoiseMode) -> Vec<f64> {
    let n = z.len() as f64;
    let z_mean = z.iter().sum::<f64>() / n;
    let scale = match mode {
        NoiseMode::Literal => 1.0 / n.sqrt(),
        NoiseMode::Consistent => 1.0,
    };
    z.iter().map(|&zi| x / n + scale * (zi - z_mean)).collect()
}

/// Rescales the zero-sum residual of one block by `1 / sqrt(1 - 1/N)`.
pub fn normalize_block(x: f64, w: &mut [f64]) {
    let n = w.len() as f64;
    if w.len() < 2 {
        return;
    }
    let factor = 1.0 / (1.0 - 1.0 / n).sqrt();
    let mean = x / n;
    for v in w.iter_mut() {
        *v = mean + factor * (*v - mean);
    }
}

fn check_scale(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::invalid("scale", "scale factor must be at least 1"));
    }
    Ok(())
}

/// Calls `f(c, cy, cx, fine_indices)` for every coarse pixel, where
/// `fine_indices` are the flat indices of its `s × s` fine block.
fn for_each_block(
    shape: (usize, usize, usize),
    s: usize,
    mut f: impl FnMut(usize, usize, usize, &[usize]),
) {
    let (channels, h, w) = shape;
    let fine_w = w * s;
    let mut idx = vec![0usize; s * s];
    for c in 0..channels {
        for cy in 0..h {
            for cx in 0..w {
                for dy in 0..s {
                    for dx in 0..s {
                        idx[dy * s + dx] =
                            (c * h * s + cy * s + dy) * fine_w + cx * s + dx;
                    }
                }
                f(c, cy, cx, &idx);
            }
        }
    }
}

/// Expands `coarse` by a factor `s` on each axis, drawing `s²` normals per
/// coarse pixel from `rng` in planar row-major order.
pub fn subsample_noise<R: Rng>(
    coarse: &ImageBuffer,
    s: usize,
    rng: &mut R,
    mode: NoiseMode,
) -> Result<NoiseField> {
    check_scale(s)?;
    let (channels, h, w) = coarse.shape();
    let mut fine = ImageBuffer::zeros(channels, h * s, w * s);
    let mut z = vec![0.0; s * s];
    for_each_block(coarse.shape(), s, |c, cy, cx, idx| {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let block = subsample_block(coarse.get(c, cy, cx), &z, mode);
        let data = fine.data_mut();
        for (&i, v) in idx.iter().zip(block) {
            data[i] = v;
        }
    });
    Ok(NoiseField {
        field: fine,
        block_size: s,
        mode,
    })
}

/// Applies [`normalize_block`] to every block of `field`. With `s = 1` the
/// correction is singular and the field is returned unchanged.
pub fn normalize_variance(field: &NoiseField, coarse: &ImageBuffer) -> Result<NoiseField> {
    let s = field.block_size;
    check_scale(s)?;
    let (channels, h, w) = coarse.shape();
    if field.field.shape() != (channels, h * s, w * s) {
        return Err(Error::ShapeMismatch {
            expected: (channels, h * s, w * s),
            actual: field.field.shape(),
        });
    }
    if s == 1 {
        log::debug!("normalize_variance: block size 1, nothing to rescale");
        return Ok(field.clone());
    }
    let mut out = field.clone();
    let mut block = vec![0.0; s * s];
    for_each_block(coarse.shape(), s, |c, cy, cx, idx| {
        let data = out.field.data_mut();
        for (b, &i) in block.iter_mut().zip(idx) {
            *b = data[i];
        }
        normalize_block(coarse.get(c, cy, cx), &mut block);
        for (&i, &b) in idx.iter().zip(&block) {
            data[i] = b;
        }
    });
    Ok(out)
}

/// Sums each `s × s` block of `fine`, the inverse direction of subsampling.
pub fn block_sums(fine: &ImageBuffer, s: usize) -> Result<ImageBuffer> {
    check_scale(s)?;
    let (channels, fh, fw) = fine.shape();
    if fh % s != 0 || fw % s != 0 {
        return Err(Error::NotDivisible {
            axis: if fh % s != 0 { "height" } else { "width" },
            size: if fh % s != 0 { fh } else { fw },
            divisor: s,
        });
    }
    let mut out = ImageBuffer::zeros(channels, fh / s, fw / s);
    for_each_block(out.shape(), s, |c, cy, cx, idx| {
        let sum = idx.iter().map(|&i| fine.data()[i]).sum();
        out.set(c, cy, cx, sum);
    });
    Ok(out)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for an independent stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Stream index reserved for the shared coarse field.
pub const COARSE_STREAM: u64 = u64::MAX;

pub fn tile_stream_seed(master: u64, tile: usize) -> u64 {
    derive_seed(master, tile as u64)
}

/// Expands one coarse block into a variance-normalized tile latent.
pub fn expand_block(
    coarse_block: &ImageBuffer,
    s: usize,
    stream_seed: u64,
    mode: NoiseMode,
) -> Result<NoiseField> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let raw = subsample_noise(coarse_block, s, &mut rng, mode)?;
    normalize_variance(&raw, coarse_block)
}

/// Per-tile latents for a `2^level × 2^level` mosaic of a reference with the
/// given shape. All tiles come from one coarse field seeded by
/// `master_seed`; each tile expands its block with its own derived stream.
pub fn init_tile_latents(
    ref_shape: (usize, usize, usize),
    level: u32,
    s: usize,
    master_seed: u64,
    mode: NoiseMode,
) -> Result<(CoarseLatent, Vec<NoiseField>)> {
    init_tile_latents_with(ref_shape, level, s, master_seed, mode, |k| {
        tile_stream_seed(master_seed, k)
    })
}

/// [`init_tile_latents`] with a caller-supplied per-tile seed function.
pub fn init_tile_latents_with(
    ref_shape: (usize, usize, usize),
    level: u32,
    s: usize,
    master_seed: u64,
    mode: NoiseMode,
    tile_seed: impl Fn(usize) -> u64 + Sync,
) -> Result<(CoarseLatent, Vec<NoiseField>)> {
    check_scale(s)?;
    let (channels, h, w) = ref_shape;
    let coarse = CoarseLatent::sample(channels, h, w, derive_seed(master_seed, COARSE_STREAM));
    let grid = partition_blocks(&coarse.field, level)?;
    let tiles = grid
        .blocks
        .par_iter()
        .enumerate()
        .map(|(k, block)| expand_block(block, s, tile_seed(k), mode))
        .collect::<Result<Vec<_>>>()?;
    Ok((coarse, tiles))
}
