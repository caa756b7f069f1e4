use crate::error::{Error, Result};

use super::ImageBuffer;

/// Rec. 601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// `Y = 0.299 R + 0.587 G + 0.114 B`, as a one-channel image.
pub fn rgb_to_luma(img: &ImageBuffer) -> Result<ImageBuffer> {
    let (channels, h, w) = img.shape();
    if channels != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            actual: channels,
        });
    }
    let (r, g, b) = (img.channel(0), img.channel(1), img.channel(2));
    let data = (0..h * w)
        .map(|i| LUMA_WEIGHTS[0] * r[i] + LUMA_WEIGHTS[1] * g[i] + LUMA_WEIGHTS[2] * b[i])
        .collect();
    ImageBuffer::new(1, h, w, data)
}

/// Replicates a gray image into three channels; RGB passes through.
pub fn to_rgb(img: &ImageBuffer) -> Result<ImageBuffer> {
    match img.channels() {
        3 => Ok(img.clone()),
        1 => Ok(ImageBuffer::from_fn(3, img.height(), img.width(), |_, y, x| {
            img.get(0, y, x)
        })),
        n => Err(Error::ChannelCount {
            expected: 3,
            actual: n,
        }),
    }
}

/// Transpose of [`rgb_to_luma`]: spreads a luma-space gradient back onto
/// the three color channels.
pub fn luma_adjoint(grad: &ImageBuffer) -> Result<ImageBuffer> {
    let (channels, h, w) = grad.shape();
    if channels != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            actual: channels,
        });
    }
    Ok(ImageBuffer::from_fn(3, h, w, |c, y, x| {
        LUMA_WEIGHTS[c] * grad.get(0, y, x)
    }))
}
