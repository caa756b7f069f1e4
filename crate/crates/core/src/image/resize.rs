use crate::error::{Error, Result};

use super::ImageBuffer;

/// Source sample positions for one axis: `(lo, hi, frac)` per output index,
/// using half-pixel-center alignment and clamping at the borders.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Bilinear resize with half-pixel centers.
pub fn resize_bilinear(img: &ImageBuffer, out_h: usize, out_w: usize) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(
            "size",
            format!("output {out_h}x{out_w} has a zero dimension"),
        ));
    }
    let (channels, h, w) = img.shape();
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let ys = axis_weights(h, out_h);
    let xs = axis_weights(w, out_w);
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    Ok(ImageBuffer::from_fn(channels, out_h, out_w, |c, y, x| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let top = lerp(img.get(c, y0, x0), img.get(c, y0, x1), fx);
        let bottom = lerp(img.get(c, y1, x0), img.get(c, y1, x1), fx);
        lerp(top, bottom, fy)
    }))
}

/// Crops the largest centered window with the aspect ratio of
/// `out_h × out_w`, then resizes it to exactly that size.
pub fn center_crop_resize(img: &ImageBuffer, out_h: usize, out_w: usize) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(
            "size",
            format!("output {out_h}x{out_w} has a zero dimension"),
        ));
    }
    let (_, h, w) = img.shape();
    // Widest window with h' / w' = out_h / out_w that fits.
    let (ch, cw) = if h * out_w >= w * out_h {
        ((w * out_h / out_w).max(1), w)
    } else {
        (h, (h * out_w / out_h).max(1))
    };
    let cropped = img.crop((h - ch) / 2, (w - cw) / 2, ch, cw)?;
    resize_bilinear(&cropped, out_h, out_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let img = ImageBuffer::from_fn(3, 96, 96, |c, y, x| ((c + y * x) % 17) as f64 / 17.0);
        assert_eq!(resize_bilinear(&img, 96, 96).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = ImageBuffer::filled(1, 4, 4, 0.3);
        let out = resize_bilinear(&img, 7, 7).unwrap();
        assert_eq!(out.shape(), (1, 7, 7));
        assert!(out.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn two_pixels_to_four() {
        // Output centers land at source x = -0.25, 0.25, 0.75, 1.25; the
        // outer two clamp to the border pixels.
        let img = ImageBuffer::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 1, 4).unwrap();
        assert_eq!(out.data(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn downsample_by_two_averages_pairs() {
        let img = ImageBuffer::new(1, 1, 4, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let out = resize_bilinear(&img, 1, 2).unwrap();
        assert_eq!(out.data(), &[0.5, 2.5]);
    }

    #[test]
    fn center_crop_then_resize() {
        let img = ImageBuffer::from_fn(1, 4, 8, |_, y, x| (y * 8 + x) as f64);
        let out = center_crop_resize(&img, 4, 4).unwrap();
        assert_eq!(out, img.crop(0, 2, 4, 4).unwrap());
        let out = center_crop_resize(&img, 2, 2).unwrap();
        assert_eq!(out.shape(), (1, 2, 2));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(resize_bilinear(&ImageBuffer::zeros(1, 2, 2), 0, 3).is_err());
    }
}
