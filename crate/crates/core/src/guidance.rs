//! Per-step steering of a tile toward its reference block: per-channel
//! mean/std alignment of the clean-image estimate, and gradient descent on
//! the latent against a blurred-MSE objective.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, gaussian_blur_adjoint, luma_adjoint, rgb_to_luma, ImageBuffer};

/// Channels whose standard deviation is at or below this are treated as
/// constant by [`adain_align`].
pub const ADAIN_EPS: f64 = 1e-6;

/// Per-channel mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

pub fn compute_stats(img: &ImageBuffer) -> ChannelStats {
    let n = img.pixels_per_channel() as f64;
    let (mean, std) = (0..img.channels())
        .map(|c| {
            let ch = img.channel(c);
            let mean = ch.iter().sum::<f64>() / n;
            let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip();
    ChannelStats { mean, std }
}

/// Shifts and scales each channel of `tile` to the target mean and std.
///
/// A channel whose own std is `<= eps` carries no shape to rescale and is
/// replaced by the constant target mean.
pub fn adain_align(tile: &ImageBuffer, target: &ChannelStats, eps: f64) -> Result<ImageBuffer> {
    if target.channels() != tile.channels() {
        return Err(Error::ChannelCount {
            expected: target.channels(),
            actual: tile.channels(),
        });
    }
    let source = compute_stats(tile);
    let mut out = tile.clone();
    for c in 0..tile.channels() {
        let (mu_t, sd_t) = (source.mean[c], source.std[c]);
        let (mu_r, sd_r) = (target.mean[c], target.std[c]);
        let ch = out.channel_mut(c);
        if sd_t <= eps {
            ch.fill(mu_r);
        } else {
            let k = sd_r / sd_t;
            ch.iter_mut().for_each(|v| *v = mu_r + k * (*v - mu_t));
        }
    }
    Ok(out)
}

/// Which image the low-frequency loss compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Blurred MSE over all color channels.
    #[default]
    #[serde(rename = "rgb-mse")]
    RgbMse,
    /// Blurred MSE on Rec. 601 luma only.
    #[serde(rename = "luma-mse")]
    LumaMse,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb-mse" => Ok(Self::RgbMse),
            "luma-mse" => Ok(Self::LumaMse),
            other => Err(Error::invalid(
                "objective",
                format!("`{other}` is not one of rgb-mse, luma-mse"),
            )),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RgbMse => "rgb-mse",
            Self::LumaMse => "luma-mse",
        })
    }
}

/// Step size, its per-step decay, and the loss being descended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceState {
    pub w: f64,
    pub gamma: f64,
    pub blur_sigma: f64,
    pub objective: Objective,
}

impl GuidanceState {
    pub fn new(w: f64, gamma: f64, blur_sigma: f64, objective: Objective) -> Result<Self> {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid("w0", format!("{w} must be finite and >= 0")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid("gamma", format!("{gamma} not in (0, 1]")));
        }
        if !(blur_sigma >= 0.0) || !blur_sigma.is_finite() {
            return Err(Error::invalid(
                "blur_sigma",
                format!("{blur_sigma} must be finite and >= 0"),
            ));
        }
        Ok(Self {
            w,
            gamma,
            blur_sigma,
            objective,
        })
    }
}

fn objective_view(img: &ImageBuffer, objective: Objective) -> Result<ImageBuffer> {
    match objective {
        Objective::RgbMse => Ok(img.clone()),
        Objective::LumaMse => rgb_to_luma(img),
    }
}

/// A block's blurred view, cached so each step only blurs the estimate.
#[derive(Clone, Debug)]
pub struct LowFreqTarget {
    blurred: ImageBuffer,
    shape: (usize, usize, usize),
    blur_sigma: f64,
    objective: Objective,
}

impl LowFreqTarget {
    pub fn new(block: &ImageBuffer, blur_sigma: f64, objective: Objective) -> Result<Self> {
        Ok(Self {
            blurred: gaussian_blur(&objective_view(block, objective)?, blur_sigma)?,
            shape: block.shape(),
            blur_sigma,
            objective,
        })
    }

    /// `G(view(x)) − G(view(block))`.
    fn residual(&self, x0: &ImageBuffer) -> Result<ImageBuffer> {
        if x0.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                actual: x0.shape(),
            });
        }
        let a = gaussian_blur(&objective_view(x0, self.objective)?, self.blur_sigma)?;
        a.zip_map(&self.blurred, |p, q| p - q)
    }

    pub fn loss(&self, x0: &ImageBuffer) -> Result<f64> {
        let r = self.residual(x0)?;
        Ok(r.data().iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
    }

    /// Loss and `(2/P) · Vᵀ Gᵀ (G V x − G V b)`, its gradient in `x`.
    pub fn loss_and_grad(&self, x0: &ImageBuffer) -> Result<(f64, ImageBuffer)> {
        let r = self.residual(x0)?;
        let p = r.len() as f64;
        let loss = r.data().iter().map(|v| v * v).sum::<f64>() / p;
        let back = gaussian_blur_adjoint(&r, self.blur_sigma)?.map(|v| 2.0 * v / p);
        let grad = match self.objective {
            Objective::RgbMse => back,
            Objective::LumaMse => luma_adjoint(&back)?,
        };
        Ok((loss, grad))
    }
}

/// Mean squared difference of the blurred tile estimate and blurred block.
pub fn lowfreq_loss(
    tile_x0: &ImageBuffer,
    block: &ImageBuffer,
    blur_sigma: f64,
    objective: Objective,
) -> Result<f64> {
    tile_x0.ensure_same_shape(block)?;
    LowFreqTarget::new(block, blur_sigma, objective)?.loss(tile_x0)
}

/// Loss value and its gradient with respect to the tile estimate.
pub fn lowfreq_loss_and_grad(
    tile_x0: &ImageBuffer,
    block: &ImageBuffer,
    blur_sigma: f64,
    objective: Objective,
) -> Result<(f64, ImageBuffer)> {
    tile_x0.ensure_same_shape(block)?;
    LowFreqTarget::new(block, blur_sigma, objective)?.loss_and_grad(tile_x0)
}

/// How the gradient is carried from `x̂0` back to the latent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Treat the denoiser output as constant in `z`.
    #[default]
    StopGrad,
    /// Differentiate through the denoiser (needs an analytic Jacobian).
    Exact,
}

impl FromStr for JacobianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stop-grad" => Ok(Self::StopGrad),
            "exact" => Ok(Self::Exact),
            other => Err(Error::invalid(
                "jacobian_mode",
                format!("`{other}` is not one of stop-grad, exact"),
            )),
        }
    }
}

impl fmt::Display for JacobianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StopGrad => "stop-grad",
            Self::Exact => "exact",
        })
    }
}

/// The `z ↦ x̂0` Jacobian, as used by [`guidance_gradient`].
pub enum Jacobian<'a> {
    /// `∂x̂0/∂z = scale · I` (`α_t` for v-prediction, `1/α_t` for ε).
    StopGrad { scale: f64 },
    /// Vector-Jacobian product through the full denoiser.
    Exact(&'a dyn Fn(&ImageBuffer) -> Result<ImageBuffer>),
}

/// `∇_z ℓ` for the low-frequency loss at the estimate `x0_hat`.
pub fn guidance_gradient(
    x0_hat: &ImageBuffer,
    block: &ImageBuffer,
    state: &GuidanceState,
    jacobian: Jacobian<'_>,
) -> Result<ImageBuffer> {
    x0_hat.ensure_same_shape(block)?;
    let target = LowFreqTarget::new(block, state.blur_sigma, state.objective)?;
    Ok(target_gradient(x0_hat, &target, jacobian)?.1)
}

/// Loss at `x0_hat` and `∇_z ℓ`, against a cached target.
pub fn target_gradient(
    x0_hat: &ImageBuffer,
    target: &LowFreqTarget,
    jacobian: Jacobian<'_>,
) -> Result<(f64, ImageBuffer)> {
    let (loss, grad_x0) = target.loss_and_grad(x0_hat)?;
    let grad = match jacobian {
        Jacobian::StopGrad { scale } => grad_x0.map(|g| scale * g),
        Jacobian::Exact(vjp) => vjp(&grad_x0)?,
    };
    Ok((loss, grad))
}

/// `z' = z − w · grad`, then `w' = γ · w`.
pub fn guidance_update(
    z: &ImageBuffer,
    grad: &ImageBuffer,
    state: &GuidanceState,
) -> Result<(ImageBuffer, GuidanceState)> {
    let mut next = z.clone();
    if state.w != 0.0 {
        next.add_scaled(grad, -state.w)?;
    } else {
        z.ensure_same_shape(grad)?;
    }
    let decayed = GuidanceState {
        w: state.gamma * state.w,
        ..*state
    };
    Ok((next, decayed))
}
