use crate::error::{Error, Result};

/// Dense planar image: `channels × height × width` values, row-major within
/// each channel.
///
/// Values are nominally in `[0, 1]` but may leave that range while a sampler
/// is running. Quantization to 8 bits only happens at file I/O.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(
                "shape",
                format!("{channels}x{height}x{width} has an empty axis"),
            ));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::invalid(
                "data",
                format!("length {} != {channels}x{height}x{width}", data.len()),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image shape");
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn zeros_like(other: &ImageBuffer) -> Self {
        Self::zeros(other.channels, other.height, other.width)
    }

    /// Builds an image from `f(channel, y, x)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    img.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        img
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn pixels_per_channel(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixels_per_channel();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.pixels_per_channel();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &ImageBuffer) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageBuffer {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    /// Element-wise combination of two same-shaped images.
    pub fn zip_map(&self, other: &ImageBuffer, f: impl Fn(f64, f64) -> f64) -> Result<ImageBuffer> {
        self.ensure_same_shape(other)?;
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// `self + k * other`, in place.
    pub fn add_scaled(&mut self, other: &ImageBuffer, k: f64) -> Result<()> {
        self.ensure_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> ImageBuffer {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean squared difference to another image of the same shape.
    pub fn mse(&self, other: &ImageBuffer) -> Result<f64> {
        self.ensure_same_shape(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub fn rms_diff(&self, other: &ImageBuffer) -> Result<f64> {
        Ok(self.mse(other)?.sqrt())
    }

    /// Copies the `h × w` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<ImageBuffer> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return Err(Error::invalid(
                "crop",
                format!(
                    "window {h}x{w} at ({y0},{x0}) outside {}x{}",
                    self.height, self.width
                ),
            ));
        }
        let mut out = ImageBuffer::zeros(self.channels, h, w);
        for c in 0..self.channels {
            for y in 0..h {
                let src = &self.channel(c)[(y0 + y) * self.width + x0..][..w];
                out.channel_mut(c)[y * w..(y + 1) * w].copy_from_slice(src);
            }
        }
        Ok(out)
    }

    /// Largest centered square crop.
    pub fn center_square(&self) -> ImageBuffer {
        let side = self.height.min(self.width);
        self.crop((self.height - side) / 2, (self.width - side) / 2, side, side)
            .expect("centered square always fits")
    }

    /// Same shape, new contents. Panics if the length is wrong.
    pub fn with_data(&self, data: Vec<f64>) -> ImageBuffer {
        assert_eq!(data.len(), self.data.len(), "data length must match shape");
        ImageBuffer {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }
}
