pub mod ablate;
pub mod classic;
pub mod eval;
pub mod generate;
pub mod noise;

use std::fs;
use std::path::Path;

use mosaicgen::diffusion::ExemplarPool;
use mosaicgen::image::{load_image, to_rgb, ImageBuffer};
use mosaicgen::metrics::{eval_report, MetricsReport, DEFAULT_PYRAMID_LEVELS, DEFAULT_RESOLUTIONS};
use mosaicgen::pipeline::MosaicConfig;

use crate::{config, usage, CmdResult, RunArgs};

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(args: &RunArgs) -> CmdResult<MosaicConfig> {
    let mut cfg = config::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(w0) = args.w0 {
        cfg.w0 = w0;
    }
    if let Some(level) = args.level {
        cfg.level = level;
    }
    if let Some(mode) = &args.mode {
        cfg.noise_mode = mode.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn require_exists(path: &Path, what: &str) -> CmdResult {
    if !path.exists() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

/// Loads an image as RGB.
pub fn load_rgb(path: &Path, what: &str) -> CmdResult<ImageBuffer> {
    require_exists(path, what)?;
    Ok(to_rgb(&load_image(path)?)?)
}

/// Tile shape implied by a reference and config, checking divisibility.
pub fn tile_shape(reference: &ImageBuffer, cfg: &MosaicConfig) -> CmdResult<(usize, usize, usize)> {
    let grid = mosaicgen::image::partition_blocks(reference, cfg.level)?;
    Ok((reference.channels(), grid.block_h * cfg.scale, grid.block_w * cfg.scale))
}

pub fn load_pool(dir: &Path, shape: (usize, usize, usize)) -> CmdResult<ExemplarPool> {
    require_exists(dir, "pool directory")?;
    let pool = ExemplarPool::load_dir(dir, Some(shape))?;
    log::info!(
        "pool: {} exemplars at {}x{}, labels {:?}",
        pool.len(),
        shape.1,
        shape.2,
        pool.distinct_labels()
    );
    Ok(pool)
}

pub fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Deepest pyramid (at most the default) the image dimensions allow.
pub fn pyramid_levels(img: &ImageBuffer) -> usize {
    let (_, h, w) = img.shape();
    (1..=DEFAULT_PYRAMID_LEVELS)
        .take_while(|&k| h % (1 << k) == 0 && w % (1 << k) == 0 && h >> k >= 1 && w >> k >= 1)
        .last()
        .unwrap_or(0)
}

/// Default report for two same-shaped images.
pub fn default_report(reference: &ImageBuffer, mosaic: &ImageBuffer) -> CmdResult<MetricsReport> {
    let levels = pyramid_levels(reference);
    if levels == 0 {
        return Err(usage("reference dimensions must be even for pyramid metrics"));
    }
    Ok(eval_report(reference, mosaic, &DEFAULT_RESOLUTIONS, levels)?)
}
