use crate::error::{Error, Result};

use super::ImageBuffer;

/// A `2^L × 2^L` partition of an image into equal, non-overlapping blocks,
/// stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrid {
    pub rows: usize,
    pub cols: usize,
    pub block_h: usize,
    pub block_w: usize,
    pub blocks: Vec<ImageBuffer>,
}

impl BlockGrid {
    /// Assembles a grid from already-built blocks (e.g. generated tiles).
    pub fn from_blocks(rows: usize, cols: usize, blocks: Vec<ImageBuffer>) -> Result<Self> {
        if blocks.len() != rows * cols || blocks.is_empty() {
            return Err(Error::IncompleteGrid {
                expected: rows * cols,
                actual: blocks.len(),
            });
        }
        let (_, block_h, block_w) = blocks[0].shape();
        for b in &blocks[1..] {
            blocks[0].ensure_same_shape(b)?;
        }
        Ok(Self {
            rows,
            cols,
            block_h,
            block_w,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Grid position `(row, col)` of block `k`.
    pub fn position(&self, k: usize) -> (usize, usize) {
        (k / self.cols, k % self.cols)
    }
}

/// Side length `2^L` of the grid for mosaic level `level`.
pub fn grid_side(level: u32) -> Result<usize> {
    1usize
        .checked_shl(level)
        .filter(|_| level < usize::BITS / 2)
        .ok_or_else(|| Error::invalid("level", format!("{level} is too deep")))
}

/// Cuts `img` into `4^level` blocks.
pub fn partition_blocks(img: &ImageBuffer, level: u32) -> Result<BlockGrid> {
    let side = grid_side(level)?;
    let (_, height, width) = img.shape();
    if height % side != 0 {
        return Err(Error::NotDivisible {
            axis: "height",
            size: height,
            divisor: side,
        });
    }
    if width % side != 0 {
        return Err(Error::NotDivisible {
            axis: "width",
            size: width,
            divisor: side,
        });
    }
    let (block_h, block_w) = (height / side, width / side);
    let mut blocks = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            blocks.push(img.crop(row * block_h, col * block_w, block_h, block_w)?);
        }
    }
    Ok(BlockGrid {
        rows: side,
        cols: side,
        block_h,
        block_w,
        blocks,
    })
}

/// Inverse of [`partition_blocks`].
pub fn compose_grid(grid: &BlockGrid) -> Result<ImageBuffer> {
    if grid.blocks.len() != grid.rows * grid.cols || grid.blocks.is_empty() {
        return Err(Error::IncompleteGrid {
            expected: grid.rows * grid.cols,
            actual: grid.blocks.len(),
        });
    }
    let channels = grid.blocks[0].channels();
    let expected = (channels, grid.block_h, grid.block_w);
    for b in &grid.blocks {
        if b.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: b.shape(),
            });
        }
    }
    let (height, width) = (grid.rows * grid.block_h, grid.cols * grid.block_w);
    let mut out = ImageBuffer::zeros(channels, height, width);
    for (k, block) in grid.blocks.iter().enumerate() {
        let (row, col) = grid.position(k);
        let (y0, x0) = (row * grid.block_h, col * grid.block_w);
        for c in 0..channels {
            let src = block.channel(c);
            let dst = out.channel_mut(c);
            for y in 0..grid.block_h {
                dst[(y0 + y) * width + x0..][..grid.block_w]
                    .copy_from_slice(&src[y * grid.block_w..(y + 1) * grid.block_w]);
            }
        }
    }
    Ok(out)
}
