use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

use super::ImageBuffer;

fn image_err(path: &Path, reason: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Reads an 8-bit grayscale or RGB PNG, mapping byte `b` to `b / 255`.
/// An alpha channel is dropped with a warning.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, bytes) = match decoded {
        DynamicImage::ImageLuma8(img) => (1, img.into_raw()),
        DynamicImage::ImageRgb8(img) => (3, img.into_raw()),
        DynamicImage::ImageLumaA8(_) => {
            log::warn!("{}: dropping alpha channel", path.display());
            (1, decoded.to_luma8().into_raw())
        }
        DynamicImage::ImageRgba8(_) => {
            log::warn!("{}: dropping alpha channel", path.display());
            (3, decoded.to_rgb8().into_raw())
        }
        other => {
            return Err(image_err(
                path,
                format!("unsupported pixel format {:?}; expected 8-bit", other.color()),
            ))
        }
    };
    // Interleaved bytes to planar floats.
    let mut data = vec![0.0; channels * h * w];
    for (i, px) in bytes.chunks_exact(channels).enumerate() {
        for (c, &b) in px.iter().enumerate() {
            data[c * h * w + i] = b as f64 / 255.0;
        }
    }
    ImageBuffer::new(channels, h, w, data)
}

/// Quantizes a value in `[0, 1]` to a byte, clamping out-of-range input.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1- or 3-channel image as an 8-bit PNG.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (channels, h, w) = img.shape();
    let n = h * w;
    let mut bytes = vec![0u8; channels * n];
    for c in 0..channels {
        for (i, &v) in img.channel(c).iter().enumerate() {
            bytes[i * channels + c] = quantize(v);
        }
    }
    let (w32, h32) = (w as u32, h as u32);
    let result = match channels {
        1 => GrayImage::from_raw(w32, h32, bytes).map(|i| i.save(path)),
        3 => RgbImage::from_raw(w32, h32, bytes).map(|i| i.save(path)),
        _ => {
            return Err(Error::ChannelCount {
                expected: 3,
                actual: channels,
            })
        }
    };
    result
        .expect("buffer length matches dimensions")
        .map_err(|e| image_err(path, e))
}

fn is_png(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| image_err(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// PNG files in `dir` (label `None`) followed by PNGs in each immediate
/// subdirectory (labelled with the subdirectory name), in sorted order.
pub fn list_png_dir(dir: &Path) -> Result<Vec<(Option<String>, PathBuf)>> {
    let entries = sorted_entries(dir)?;
    let mut out: Vec<(Option<String>, PathBuf)> = entries
        .iter()
        .filter(|p| is_png(p))
        .map(|p| (None, p.clone()))
        .collect();
    for sub in entries.iter().filter(|p| p.is_dir()) {
        let label = sub.file_name().map(|n| n.to_string_lossy().into_owned());
        for p in sorted_entries(sub)?.into_iter().filter(|p| is_png(p)) {
            out.push((label.clone(), p));
        }
    }
    if out.is_empty() {
        return Err(image_err(dir, "no PNG files found"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_round_trip() {
        for b in 0..=255u8 {
            assert_eq!(quantize(b as f64 / 255.0), b);
        }
        assert!((128.0 / 255.0 - 0.50196_f64).abs() < 1e-5);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(-0.2), 0);
    }

    #[test]
    fn png_round_trip_rgb_and_gray() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1, 3] {
            let img = ImageBuffer::from_fn(channels, 5, 7, |c, y, x| {
                ((c * 31 + y * 7 + x * 13) % 256) as f64 / 255.0
            });
            let path = dir.path().join(format!("img{channels}.png"));
            save_image(&img, &path).unwrap();
            let back = load_image(&path).unwrap();
            assert_eq!(back, img);
            let path2 = dir.path().join(format!("img{channels}b.png"));
            save_image(&back, &path2).unwrap();
            assert_eq!(
                image::open(&path).unwrap().into_bytes(),
                image::open(&path2).unwrap().into_bytes()
            );
        }
    }

    #[test]
    fn alpha_is_stripped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        image::RgbaImage::from_raw(1, 1, vec![10, 20, 30, 40])
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.shape(), (3, 1, 1));
        assert_eq!(quantize(img.data()[2]), 30);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![1000u16])
            .unwrap()
            .save(&path)
            .unwrap();
        assert!(matches!(load_image(&path), Err(Error::Image { .. })));
        assert!(load_image(dir.path().join("missing.png")).is_err());
    }
}
