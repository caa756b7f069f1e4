//! Classical photomosaic baseline: nearest tile by L2 distance, optionally
//! followed by a tone or histogram adjustment toward the block.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{adain_align, compute_stats, ADAIN_EPS};
use crate::image::{
    center_crop_resize, compose_grid, list_png_dir, load_image, partition_blocks, resize_bilinear,
    to_rgb, BlockGrid, ImageBuffer,
};

/// Candidate tiles plus how often each has been used.
#[derive(Clone, Debug)]
pub struct TilePool {
    tiles: Vec<ImageBuffer>,
    usage: Vec<usize>,
    max_reuse: Option<usize>,
}

impl TilePool {
    pub fn new(tiles: Vec<ImageBuffer>, max_reuse: Option<usize>) -> Result<Self> {
        if tiles.is_empty() {
            return Err(Error::EmptyPool);
        }
        for t in &tiles[1..] {
            tiles[0].ensure_same_shape(t)?;
        }
        if max_reuse == Some(0) {
            return Err(Error::invalid("max_reuse", "must be at least 1"));
        }
        let usage = vec![0; tiles.len()];
        Ok(Self {
            tiles,
            usage,
            max_reuse,
        })
    }

    /// Loads every PNG under `dir` (subdirectories included), center-crops
    /// and resizes each to `tile_h × tile_w`, promoting gray to RGB.
    pub fn load_dir(
        dir: impl AsRef<Path>,
        tile_h: usize,
        tile_w: usize,
        max_reuse: Option<usize>,
    ) -> Result<Self> {
        let tiles = list_png_dir(dir.as_ref())?
            .into_iter()
            .map(|(_, path)| {
                let img = to_rgb(&load_image(&path)?)?;
                center_crop_resize(&img, tile_h, tile_w)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tiles, max_reuse)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tiles(&self) -> &[ImageBuffer] {
        &self.tiles
    }

    pub fn usage(&self) -> &[usize] {
        &self.usage
    }

    pub fn tile_shape(&self) -> (usize, usize, usize) {
        self.tiles[0].shape()
    }

    fn eligible(&self, i: usize) -> bool {
        self.max_reuse.is_none_or(|cap| self.usage[i] < cap)
    }

    /// Best eligible tile without recording the use.
    fn best(&self, block: &ImageBuffer) -> Result<TileMatch> {
        let mut best: Option<TileMatch> = None;
        for (i, tile) in self.tiles.iter().enumerate() {
            if !self.eligible(i) {
                continue;
            }
            let d = ssd(block, tile)?;
            if best.as_ref().is_none_or(|b| d < b.distance) {
                best = Some(TileMatch {
                    index: i,
                    distance: d,
                });
            }
        }
        best.ok_or(Error::PoolExhausted)
    }
}

/// Which pool tile filled a block, and its squared L2 distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileMatch {
    pub index: usize,
    pub distance: f64,
}

fn ssd(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Nearest eligible tile by sum of squared differences, lowest index on
/// ties. Increments the winner's usage count.
pub fn match_tile(block: &ImageBuffer, pool: &mut TilePool) -> Result<TileMatch> {
    let m = pool.best(block)?;
    pool.usage[m.index] += 1;
    Ok(m)
}

/// Mean/std transfer of the block's statistics onto the tile, clamped to
/// `[0, 1]`.
pub fn tone_map(tile: &ImageBuffer, block: &ImageBuffer) -> Result<ImageBuffer> {
    tile.ensure_same_shape(block)?;
    Ok(adain_align(tile, &compute_stats(block), ADAIN_EPS)?.clamped(0.0, 1.0))
}

pub const HISTOGRAM_BINS: usize = 256;

fn bin_of(v: f64) -> usize {
    (v.clamp(0.0, 1.0) * (HISTOGRAM_BINS - 1) as f64).round() as usize
}

/// Normalized cumulative histogram of one channel over 256 bins.
pub fn channel_cdf(values: &[f64]) -> [f64; HISTOGRAM_BINS] {
    let mut hist = [0.0; HISTOGRAM_BINS];
    for &v in values {
        hist[bin_of(v)] += 1.0;
    }
    let n = values.len() as f64;
    let mut acc = 0.0;
    for h in hist.iter_mut() {
        acc += *h / n;
        *h = acc;
    }
    hist
}

/// Per-channel CDF matching of the tile onto the block.
///
/// Each source bin is looked up at the midpoint of its CDF step and mapped
/// to the lowest target bin whose CDF reaches that level. Output values are
/// bin centers `j / 255`.
pub fn histogram_match(tile: &ImageBuffer, block: &ImageBuffer) -> Result<ImageBuffer> {
    if tile.channels() != block.channels() {
        return Err(Error::ChannelCount {
            expected: block.channels(),
            actual: tile.channels(),
        });
    }
    let mut out = tile.clone();
    for c in 0..tile.channels() {
        let src = channel_cdf(tile.channel(c));
        let dst = channel_cdf(block.channel(c));
        let mut lut = [0usize; HISTOGRAM_BINS];
        for (b, entry) in lut.iter_mut().enumerate() {
            let below = if b == 0 { 0.0 } else { src[b - 1] };
            let level = 0.5 * (below + src[b]);
            // Tolerate rounding in the accumulated CDF at the top end.
            *entry = dst
                .iter()
                .position(|&d| d >= level - 1e-12)
                .unwrap_or(HISTOGRAM_BINS - 1);
        }
        for v in out.channel_mut(c) {
            *v = lut[bin_of(*v)] as f64 / (HISTOGRAM_BINS - 1) as f64;
        }
    }
    Ok(out)
}

/// Post-match adjustment applied to each chosen tile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjust {
    #[default]
    None,
    Tone,
    Histogram,
}

impl FromStr for Adjust {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "tone" => Ok(Self::Tone),
            "histogram" => Ok(Self::Histogram),
            other => Err(Error::invalid(
                "adjust",
                format!("`{other}` is not one of none, tone, histogram"),
            )),
        }
    }
}

impl fmt::Display for Adjust {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Tone => "tone",
            Self::Histogram => "histogram",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ClassicMosaic {
    pub mosaic: ImageBuffer,
    /// One entry per block, row-major.
    pub matches: Vec<TileMatch>,
}

/// Match-and-adjust mosaic of `reference` at level `level`. Blocks are
/// resized to the pool's tile size before matching, so the output is
/// `2^L` tiles on a side.
pub fn classic_mosaic(
    reference: &ImageBuffer,
    pool: &mut TilePool,
    level: u32,
    adjust: Adjust,
) -> Result<ClassicMosaic> {
    let grid = partition_blocks(reference, level)?;
    let (channels, th, tw) = pool.tile_shape();
    if reference.channels() != channels {
        return Err(Error::ChannelCount {
            expected: channels,
            actual: reference.channels(),
        });
    }
    let blocks = grid
        .blocks
        .iter()
        .map(|b| resize_bilinear(b, th, tw))
        .collect::<Result<Vec<_>>>()?;

    let matches = if pool.max_reuse.is_none() {
        // Uncapped matching is order-independent.
        let found = blocks
            .par_iter()
            .map(|b| pool.best(b))
            .collect::<Result<Vec<_>>>()?;
        for m in &found {
            pool.usage[m.index] += 1;
        }
        found
    } else {
        blocks
            .iter()
            .map(|b| match_tile(b, pool))
            .collect::<Result<Vec<_>>>()?
    };

    let tiles = blocks
        .iter()
        .zip(&matches)
        .map(|(block, m)| {
            let tile = &pool.tiles[m.index];
            match adjust {
                Adjust::None => Ok(tile.clone()),
                Adjust::Tone => tone_map(tile, block),
                Adjust::Histogram => histogram_match(tile, block),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mosaic = compose_grid(&BlockGrid::from_blocks(grid.rows, grid.cols, tiles)?)?;
    Ok(ClassicMosaic { mosaic, matches })
}
