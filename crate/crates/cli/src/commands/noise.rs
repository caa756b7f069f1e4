use std::path::PathBuf;

use clap::Args;
use mosaicgen::image::{save_image, ImageBuffer};
use mosaicgen::noise::{
    block_sums, derive_seed, normalize_variance, subsample_noise, CoarseLatent, NoiseMode, COARSE_STREAM,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::create_dir;
use crate::manifest::write_json;
use crate::{usage, CmdResult};

#[derive(Args, Debug, Clone)]
pub struct NoiseArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Coarse field height.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// literal or consistent.
    #[arg(long, default_value = "consistent")]
    pub mode: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
}

#[derive(Serialize)]
struct NoiseStats {
    height: usize,
    width: usize,
    scale: usize,
    channels: usize,
    mode: NoiseMode,
    seed: u64,
    fine_pixels: usize,
    /// `max |ΣW̃ − X|` over all blocks.
    max_block_residual: f64,
    /// Mean of `(W̃ − X/N)²`, the conditional per-pixel variance.
    variance_estimate: f64,
    /// The same before variance normalization.
    raw_variance_estimate: f64,
    expected_raw_variance: f64,
}

/// Maps `[-3, 3]` onto the displayable range.
fn to_display(field: &ImageBuffer) -> ImageBuffer {
    field.map(|v| ((v + 3.0) / 6.0).clamp(0.0, 1.0))
}

fn residual_variance(fine: &ImageBuffer, coarse: &ImageBuffer, s: usize) -> f64 {
    let n = (s * s) as f64;
    let total: f64 = (0..fine.channels())
        .flat_map(|c| (0..fine.height()).flat_map(move |y| (0..fine.width()).map(move |x| (c, y, x))))
        .map(|(c, y, x)| (fine.get(c, y, x) - coarse.get(c, y / s, x / s) / n).powi(2))
        .sum();
    total / fine.len() as f64
}

pub fn run(args: &NoiseArgs) -> CmdResult {
    let mode: NoiseMode = args.mode.parse()?;
    if args.height == 0 || args.width == 0 || args.scale == 0 || !matches!(args.channels, 1 | 3) {
        return Err(usage("height, width and scale must be positive; channels 1 or 3"));
    }
    let s = args.scale;
    let coarse = CoarseLatent::sample(args.channels, args.height, args.width, derive_seed(args.seed, COARSE_STREAM));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0));
    let raw = subsample_noise(&coarse.field, s, &mut rng, mode)?;
    let fine = normalize_variance(&raw, &coarse.field)?;

    let sums = block_sums(&fine.field, s)?;
    let max_block_residual = sums
        .data()
        .iter()
        .zip(coarse.field.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let n = (s * s) as f64;
    let stats = NoiseStats {
        height: args.height,
        width: args.width,
        scale: s,
        channels: args.channels,
        mode,
        seed: args.seed,
        fine_pixels: fine.field.len(),
        max_block_residual,
        variance_estimate: residual_variance(&fine.field, &coarse.field, s),
        raw_variance_estimate: residual_variance(&raw.field, &coarse.field, s),
        expected_raw_variance: match mode {
            NoiseMode::Consistent => (n - 1.0) / n,
            NoiseMode::Literal => (n - 1.0) / (n * n),
        },
    };

    create_dir(&args.out)?;
    save_image(&to_display(&coarse.field), args.out.join("coarse.png"))?;
    save_image(&to_display(&fine.field), args.out.join("fine.png"))?;
    write_json(&args.out.join("stats.json"), &stats)?;
    log::info!(
        "noise {}x{} x{s} ({mode}): max block residual {:.3e}, variance {:.4}",
        args.height,
        args.width,
        stats.max_block_residual,
        stats.variance_estimate
    );
    Ok(())
}
