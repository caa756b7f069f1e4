//! Global-fidelity metrics: PSNR, SSIM and Gaussian-pyramid error.

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::image::{
    gaussian_kernel, gaussian_pyramid, resize_bilinear, rgb_to_luma, ImageBuffer, PYRAMID_SIGMA,
};

/// Reported PSNR for identical (or practically identical) images.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const DEFAULT_RESOLUTIONS: [usize; 4] = [32, 64, 128, 256];
pub const DEFAULT_PYRAMID_LEVELS: usize = 4;

const SSIM_SIGMA: f64 = 1.5;
const SSIM_WINDOW: usize = 11;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// `10 log10(1 / MSE)` for images in `[0, 1]`, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let mse = a.mse(b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Valid-mode separable filtering of one plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .zip(&plane[y * w + x..y * w + x + k])
                .map(|(t, v)| t * v)
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (i, &t) in taps.iter().enumerate() {
            for x in 0..ow {
                out[y * ow + x] += t * rows[(y + i) * ow + x];
            }
        }
    }
    (out, oh, ow)
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let taps = gaussian_kernel(SSIM_SIGMA).expect("constant sigma is valid");
    debug_assert_eq!(taps.len(), SSIM_WINDOW);
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let (mu_a, _, _) = filter_valid(a, h, w, &taps);
    let (mu_b, _, _) = filter_valid(b, h, w, &taps);
    let (aa, _, _) = filter_valid(&prod(&|x, _| x * x), h, w, &taps);
    let (bb, _, _) = filter_valid(&prod(&|_, y| y * y), h, w, &taps);
    let (ab, _, _) = filter_valid(&prod(&|x, y| x * y), h, w, &taps);
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum::<f64>()
        / n as f64
}

/// Mean SSIM over all valid 11×11 Gaussian windows (σ = 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range 1). RGB inputs are compared on luma.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (channels, h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(
            "image",
            format!("{h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"),
        ));
    }
    let (a, b) = if channels == 3 {
        (rgb_to_luma(a)?, rgb_to_luma(b)?)
    } else {
        (a.clone(), b.clone())
    };
    let total: f64 = (0..a.channels())
        .map(|c| ssim_plane(a.channel(c), b.channel(c), h, w))
        .sum();
    Ok(total / a.channels() as f64)
}

/// MSE between matching levels `1..=levels` of the two Gaussian pyramids.
pub fn pyramid_error(reference: &ImageBuffer, mosaic: &ImageBuffer, levels: usize) -> Result<Vec<f64>> {
    reference.ensure_same_shape(mosaic)?;
    let pa = gaussian_pyramid(reference, levels)?;
    let pb = gaussian_pyramid(mosaic, levels)?;
    pa.iter().zip(&pb).map(|(x, y)| x.mse(y)).collect()
}

/// PSNR/SSIM at several resolutions plus pyramid errors at native size.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub resolutions: Vec<usize>,
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    /// `E_1..E_k`.
    pub pyramid: Vec<f64>,
    pub pyramid_sigma: f64,
}

impl MetricsReport {
    /// Flat `(key, value)` list in serialization order: `psnr_<res>`,
    /// `ssim_<res>`, `pyramid_e<k>`, `pyramid_sigma`.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (r, v) in self.resolutions.iter().zip(&self.psnr) {
            out.push((format!("psnr_{r}"), *v));
        }
        for (r, v) in self.resolutions.iter().zip(&self.ssim) {
            out.push((format!("ssim_{r}"), *v));
        }
        for (k, v) in self.pyramid.iter().enumerate() {
            out.push((format!("pyramid_e{}", k + 1), *v));
        }
        out.push(("pyramid_sigma".to_owned(), self.pyramid_sigma));
        out
    }
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (k, v) in &entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

fn resize_to_resolution(img: &ImageBuffer, res: usize) -> Result<ImageBuffer> {
    let (_, h, w) = img.shape();
    let out_w = ((res * w) as f64 / h as f64).round().max(1.0) as usize;
    resize_bilinear(img, res, out_w)
}

/// Full report for two same-shaped images. Each PSNR/SSIM entry resizes
/// both images so their height equals the resolution.
pub fn eval_report(
    reference: &ImageBuffer,
    mosaic: &ImageBuffer,
    resolutions: &[usize],
    levels: usize,
) -> Result<MetricsReport> {
    reference.ensure_same_shape(mosaic)?;
    let mut psnrs = Vec::with_capacity(resolutions.len());
    let mut ssims = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let a = resize_to_resolution(reference, res)?;
        let b = resize_to_resolution(mosaic, res)?;
        psnrs.push(psnr(&a, &b)?);
        ssims.push(ssim(&a, &b)?);
    }
    Ok(MetricsReport {
        resolutions: resolutions.to_vec(),
        psnr: psnrs,
        ssim: ssims,
        pyramid: pyramid_error(reference, mosaic, levels)?,
        pyramid_sigma: PYRAMID_SIGMA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(c: usize, h: usize, w: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(c, h, w, |_, _, _| rng.random::<f64>())
    }

    /// Straight per-window SSIM with explicit sums, for cross-checking the
    /// separable implementation.
    fn ssim_direct(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
        let (_, h, w) = a.shape();
        let r = 5isize;
        let mut win = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                win.push(((dy, dx), (-((dy * dy + dx * dx) as f64) / (2.0 * 1.5 * 1.5)).exp()));
            }
        }
        let norm: f64 = win.iter().map(|(_, v)| v).sum();
        let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
        let mut total = 0.0;
        let mut count = 0.0;
        for y in 5..h - 5 {
            for x in 5..w - 5 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &((dy, dx), v) in &win {
                    let p = a.get(0, (y as isize + dy) as usize, (x as isize + dx) as usize);
                    let q = b.get(0, (y as isize + dy) as usize, (x as isize + dx) as usize);
                    let k = v / norm;
                    ma += k * p;
                    mb += k * q;
                    saa += k * p * p;
                    sbb += k * q * q;
                    sab += k * p * q;
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn psnr_cases() {
        let a = random_image(3, 8, 8, 1);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let c = random_image(3, 8, 8, 2);
        let direct = 10.0 * (1.0 / a.mse(&c).unwrap()).log10();
        assert!((psnr(&a, &c).unwrap() - direct).abs() < 1e-6);
        assert_eq!(psnr(&a, &c).unwrap(), psnr(&c, &a).unwrap());
        assert!(psnr(&a, &ImageBuffer::zeros(1, 8, 8)).is_err());
    }

    #[test]
    fn ssim_cases() {
        let a = random_image(1, 24, 24, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let neg = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &neg).unwrap() < 0.2);
        let flat = ImageBuffer::filled(3, 16, 16, 0.4);
        assert!((ssim(&flat, &flat).unwrap() - 1.0).abs() < 1e-12);
        let b = random_image(1, 24, 24, 4);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim_direct(&a, &b)).abs() < 1e-9);
        assert!((ssim(&a, &neg).unwrap() - ssim_direct(&a, &neg)).abs() < 1e-9);
        assert!(ssim(&ImageBuffer::zeros(1, 10, 30), &ImageBuffer::zeros(1, 10, 30)).is_err());
    }

    fn dense_level(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
        let r = (3.0 * sigma).ceil() as i64;
        let (c, h, w) = img.shape();
        let k = |d: i64| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        let norm: f64 = (-r..=r).flat_map(|a| (-r..=r).map(move |b| k(a) * k(b))).sum();
        let blurred = ImageBuffer::from_fn(c, h, w, |ch, y, x| {
            let mut acc = 0.0;
            for a in -r..=r {
                for b in -r..=r {
                    let yy = (y as i64 + a).clamp(0, h as i64 - 1) as usize;
                    let xx = (x as i64 + b).clamp(0, w as i64 - 1) as usize;
                    acc += k(a) * k(b) * img.get(ch, yy, xx);
                }
            }
            acc / norm
        });
        ImageBuffer::from_fn(c, h / 2, w / 2, |ch, y, x| blurred.get(ch, 2 * y, 2 * x))
    }

    #[test]
    fn pyramid_error_suppresses_checkerboard() {
        let reference = random_image(1, 64, 64, 5).map(|v| 0.3 + 0.4 * v);
        // 2-pixel cells: a 1-pixel checker aliases to a constant offset under
        // even-index decimation and never fades.
        let checker = ImageBuffer::from_fn(1, 64, 64, |c, y, x| {
            reference.get(c, y, x) + if (y / 2 + x / 2) % 2 == 0 { 0.1 } else { -0.1 }
        });
        let e = pyramid_error(&reference, &checker, 4).unwrap();
        assert!(e[0] > e[2]);
        assert!(e[0] > 10.0 * e[2]);

        let (mut a, mut b) = (reference.clone(), checker.clone());
        for (k, ek) in e.iter().enumerate() {
            a = dense_level(&a, PYRAMID_SIGMA);
            b = dense_level(&b, PYRAMID_SIGMA);
            assert!((a.mse(&b).unwrap() - ek).abs() <= 1e-12 + 1e-9 * ek, "level {}", k + 1);
        }
        assert_eq!(pyramid_error(&reference, &reference, 4).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_report() {
        let a = random_image(3, 64, 64, 6);
        let report = eval_report(&a, &a, &DEFAULT_RESOLUTIONS, 4).unwrap();
        assert!(report.psnr.iter().all(|&p| p == PSNR_CAP_DB));
        assert!(report.ssim.iter().all(|&s| (s - 1.0).abs() < 1e-6));
        assert!(report.pyramid.iter().all(|&e| e == 0.0));
        let keys: Vec<_> = report.entries().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys[0], "psnr_32");
        assert_eq!(keys[4], "ssim_32");
        assert_eq!(keys[8], "pyramid_e1");
        assert_eq!(keys.last().unwrap(), "pyramid_sigma");
    }
}
