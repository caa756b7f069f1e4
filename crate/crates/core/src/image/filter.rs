use crate::error::{Error, Result};

use super::ImageBuffer;

/// Smoothing applied before each 2× decimation in [`gaussian_pyramid`].
pub const PYRAMID_SIGMA: f64 = 1.0;

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
///
/// `sigma == 0` yields the single tap `[1.0]`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(vec![1.0]);
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian blur with edge replication. Shape is preserved.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    let taps = gaussian_kernel(sigma)?;
    if taps.len() == 1 {
        return Ok(img.clone());
    }
    let (channels, h, w) = img.shape();
    let mut out = img.clone();
    let mut tmp = vec![0.0; h * w];
    for c in 0..channels {
        let plane = out.channel_mut(c);
        horizontal(plane, &mut tmp, h, w, &taps);
        vertical(&tmp, plane, h, w, &taps);
    }
    Ok(out)
}

/// Transpose of [`gaussian_blur`] as a linear operator.
///
/// Interior pixels see the same symmetric kernel, but replicated edges fold
/// their weight back onto the border pixels, so near the boundary this
/// differs from a plain blur.
pub fn gaussian_blur_adjoint(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    let taps = gaussian_kernel(sigma)?;
    if taps.len() == 1 {
        return Ok(img.clone());
    }
    let (channels, h, w) = img.shape();
    let mut out = img.clone();
    let mut tmp = vec![0.0; h * w];
    for c in 0..channels {
        let plane = out.channel_mut(c);
        vertical_adjoint(plane, &mut tmp, h, w, &taps);
        horizontal_adjoint(&tmp, plane, h, w, &taps);
    }
    Ok(out)
}

fn horizontal(src: &[f64], dst: &mut [f64], h: usize, w: usize, taps: &[f64]) {
    let r = taps.len() / 2;
    let mut padded = vec![0.0; w + 2 * r];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        padded[..r].fill(row[0]);
        padded[r..r + w].copy_from_slice(row);
        padded[r + w..].fill(row[w - 1]);
        let out = &mut dst[y * w..(y + 1) * w];
        out.fill(0.0);
        for (i, &k) in taps.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(&padded[i..i + w]) {
                *o += k * v;
            }
        }
    }
}

fn vertical(src: &[f64], dst: &mut [f64], h: usize, w: usize, taps: &[f64]) {
    let r = taps.len() as isize / 2;
    dst.fill(0.0);
    for y in 0..h {
        let out = &mut dst[y * w..(y + 1) * w];
        for (i, &k) in taps.iter().enumerate() {
            let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            for (o, &s) in out.iter_mut().zip(&src[sy * w..(sy + 1) * w]) {
                *o += k * s;
            }
        }
    }
}

fn horizontal_adjoint(src: &[f64], dst: &mut [f64], h: usize, w: usize, taps: &[f64]) {
    let r = taps.len() / 2;
    let mut padded = vec![0.0; w + 2 * r];
    for y in 0..h {
        padded.fill(0.0);
        for (x, &g) in src[y * w..(y + 1) * w].iter().enumerate() {
            for (p, &k) in padded[x..x + taps.len()].iter_mut().zip(taps) {
                *p += k * g;
            }
        }
        let row = &mut dst[y * w..(y + 1) * w];
        row.copy_from_slice(&padded[r..r + w]);
        row[0] += padded[..r].iter().sum::<f64>();
        row[w - 1] += padded[r + w..].iter().sum::<f64>();
    }
}

fn vertical_adjoint(src: &[f64], dst: &mut [f64], h: usize, w: usize, taps: &[f64]) {
    let r = taps.len() as isize / 2;
    dst.fill(0.0);
    for y in 0..h {
        let g = &src[y * w..(y + 1) * w];
        for (i, &k) in taps.iter().enumerate() {
            let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            for (o, &v) in dst[sy * w..(sy + 1) * w].iter_mut().zip(g) {
                *o += k * v;
            }
        }
    }
}

/// Keeps every second pixel on both axes, starting at index 0.
pub fn decimate2(img: &ImageBuffer) -> ImageBuffer {
    let (channels, h, w) = img.shape();
    ImageBuffer::from_fn(channels, h.div_ceil(2), w.div_ceil(2), |c, y, x| {
        img.get(c, 2 * y, 2 * x)
    })
}

/// Levels 1..=`levels` of a Gaussian pyramid: each level blurs the previous
/// one with [`PYRAMID_SIGMA`] and keeps the even-indexed pixels. The input
/// itself (level 0) is not included.
pub fn gaussian_pyramid(img: &ImageBuffer, levels: usize) -> Result<Vec<ImageBuffer>> {
    if levels == 0 {
        return Err(Error::invalid("levels", "must be at least 1"));
    }
    let (_, h, w) = img.shape();
    let factor = 1usize
        .checked_shl(levels as u32)
        .filter(|&f| f <= h && f <= w && h % f == 0 && w % f == 0);
    if factor.is_none() {
        return Err(Error::DepthUnderflow {
            levels,
            height: h,
            width: w,
        });
    }
    let mut out = Vec::with_capacity(levels);
    let mut current = img.clone();
    for _ in 0..levels {
        current = decimate2(&gaussian_blur(&current, PYRAMID_SIGMA)?);
        out.push(current.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(c: usize, h: usize, w: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(c, h, w, |_, _, _| rng.random::<f64>())
    }

    /// Dense 2-D convolution with the outer-product kernel and clamped
    /// indices. Independent of the separable implementation.
    fn dense_blur(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
        let r = (3.0 * sigma).ceil() as isize;
        let mut k2 = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                k2.push(((dy, dx), (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp()));
            }
        }
        let norm: f64 = k2.iter().map(|(_, v)| v).sum();
        let (c, h, w) = img.shape();
        ImageBuffer::from_fn(c, h, w, |ch, y, x| {
            k2.iter()
                .map(|&((dy, dx), v)| {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    v / norm * img.get(ch, sy, sx)
                })
                .sum()
        })
    }

    #[test]
    fn kernel_radius_and_normalization() {
        for sigma in [0.3, 1.0, 1.5, 2.0, 8.0] {
            let k = gaussian_kernel(sigma).unwrap();
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-7);
        }
        assert!(gaussian_kernel(-1.0).is_err());
        assert!(gaussian_blur(&ImageBuffer::zeros(1, 2, 2), -0.5).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = random_image(3, 9, 7, 1);
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = ImageBuffer::filled(3, 10, 12, 0.5);
        let out = gaussian_blur(&img, 2.0).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn impulse_matches_dense_oracle() {
        let mut img = ImageBuffer::zeros(1, 33, 33);
        img.set(0, 16, 16, 1.0);
        let fast = gaussian_blur(&img, 1.5).unwrap();
        let dense = dense_blur(&img, 1.5);
        // Peak of the normalized discrete 2-D kernel.
        let k = gaussian_kernel(1.5).unwrap();
        let peak = k[k.len() / 2] * k[k.len() / 2];
        assert!((fast.get(0, 16, 16) - peak).abs() < 1e-12);
        assert!((dense.get(0, 16, 16) - peak).abs() < 1e-12);
        assert!(fast.rms_diff(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn random_image_matches_dense_oracle_near_edges() {
        let img = random_image(2, 11, 9, 5);
        let fast = gaussian_blur(&img, 1.2).unwrap();
        let dense = dense_blur(&img, 1.2);
        for (a, b) in fast.data().iter().zip(dense.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let x = random_image(3, 13, 10, 2);
        let y = random_image(3, 13, 10, 3);
        let bx = gaussian_blur(&x, 2.5).unwrap();
        let bty = gaussian_blur_adjoint(&y, 2.5).unwrap();
        let lhs: f64 = bx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(bty.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn pyramid_shapes() {
        let img = random_image(3, 64, 64, 4);
        let pyr = gaussian_pyramid(&img, 4).unwrap();
        let sides: Vec<_> = pyr.iter().map(|l| (l.height(), l.width())).collect();
        assert_eq!(sides, vec![(32, 32), (16, 16), (8, 8), (4, 4)]);
    }

    #[test]
    fn pyramid_of_constant_is_constant() {
        let img = ImageBuffer::filled(1, 32, 32, 0.37);
        for level in gaussian_pyramid(&img, 3).unwrap() {
            assert!(level.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn pyramid_underflow() {
        let img = ImageBuffer::zeros(1, 8, 8);
        assert!(gaussian_pyramid(&img, 3).is_ok());
        assert!(matches!(
            gaussian_pyramid(&img, 4),
            Err(Error::DepthUnderflow { .. })
        ));
        assert!(gaussian_pyramid(&ImageBuffer::zeros(1, 12, 8), 3).is_err());
        assert!(gaussian_pyramid(&img, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn blur_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, sigma in 0.0f64..3.0) {
            let x = random_image(3, 12, 9, seed);
            let y = random_image(3, 12, 9, seed.wrapping_add(1));
            let lhs = gaussian_blur(&x.zip_map(&y, |p, q| a * p + b * q).unwrap(), sigma).unwrap();
            let bx = gaussian_blur(&x, sigma).unwrap();
            let by = gaussian_blur(&y, sigma).unwrap();
            let rhs = bx.zip_map(&by, |p, q| a * p + b * q).unwrap();
            for (l, r) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((l - r).abs() < 1e-5);
            }
        }
    }
}
