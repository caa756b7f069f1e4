use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

use super::NoiseSchedule;

/// What a denoiser's raw output means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    /// Output is the noise `ε`; `x̂0 = (z − σ_t ε) / α_t`.
    Epsilon,
    /// Output is the velocity `v = α_t ε − σ_t x0`; `x̂0 = α_t z − σ_t v`.
    #[default]
    V,
}

impl FromStr for Parameterization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" | "eps" => Ok(Self::Epsilon),
            "v" => Ok(Self::V),
            other => Err(Error::invalid(
                "parameterization",
                format!("`{other}` is not one of epsilon, v"),
            )),
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Epsilon => "epsilon",
            Self::V => "v",
        })
    }
}

impl Parameterization {
    /// `∂x̂0/∂z` when the raw prediction is held fixed.
    pub fn x0_z_derivative(self, t: usize, schedule: &NoiseSchedule) -> f64 {
        match self {
            Self::V => schedule.alpha(t),
            Self::Epsilon => 1.0 / schedule.alpha(t),
        }
    }
}

/// Clean-image estimate from the latent and a raw prediction.
pub fn predict_x0(
    z: &ImageBuffer,
    pred: &ImageBuffer,
    t: usize,
    schedule: &NoiseSchedule,
    parameterization: Parameterization,
) -> Result<ImageBuffer> {
    schedule.check_timestep(t)?;
    let (a, s) = (schedule.alpha(t), schedule.sigma(t));
    match parameterization {
        Parameterization::V => z.zip_map(pred, |z, v| a * z - s * v),
        Parameterization::Epsilon => z.zip_map(pred, |z, e| (z - s * e) / a),
    }
}

/// Noise estimate consistent with `z` and `x0`: `ε̂ = (z − α_t x̂0) / σ_t`.
pub fn derive_eps(
    z: &ImageBuffer,
    x0: &ImageBuffer,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<ImageBuffer> {
    if t > schedule.train_steps() {
        return Err(Error::TimestepOutOfRange {
            t,
            max: schedule.train_steps(),
        });
    }
    let (a, s) = (schedule.alpha(t), schedule.sigma(t));
    if s == 0.0 {
        return Err(Error::invalid("t", "sigma_t is zero; epsilon is undefined"));
    }
    z.zip_map(x0, |z, x| (z - a * x) / s)
}

/// Raw prediction in the given parameterization for a consistent
/// `(x̂0, ε̂)` pair.
pub fn to_prediction(
    x0: &ImageBuffer,
    eps: &ImageBuffer,
    t: usize,
    schedule: &NoiseSchedule,
    parameterization: Parameterization,
) -> Result<ImageBuffer> {
    schedule.check_timestep(t)?;
    match parameterization {
        Parameterization::Epsilon => {
            x0.ensure_same_shape(eps)?;
            Ok(eps.clone())
        }
        Parameterization::V => {
            let (a, s) = (schedule.alpha(t), schedule.sigma(t));
            eps.zip_map(x0, |e, x| a * e - s * x)
        }
    }
}

/// Classifier-free guidance: `uncond + g · (cond − uncond)`.
///
/// `g = 1` returns `cond` and `g = 0` returns `uncond` without arithmetic,
/// so those two cases are bit-exact.
pub fn cfg_combine(cond: &ImageBuffer, uncond: &ImageBuffer, g: f64) -> Result<ImageBuffer> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(Error::invalid("cfg_scale", format!("{g} must be finite and >= 0")));
    }
    cond.ensure_same_shape(uncond)?;
    if g == 1.0 {
        return Ok(cond.clone());
    }
    if g == 0.0 {
        return Ok(uncond.clone());
    }
    cond.zip_map(uncond, |c, u| u + g * (c - u))
}

/// Deterministic DDIM update `z_prev = α_prev x̂0 + σ_prev ε̂`.
/// With `t_prev = 0` this returns `x̂0`.
pub fn ddim_step(
    x0: &ImageBuffer,
    eps: &ImageBuffer,
    t: usize,
    t_prev: usize,
    schedule: &NoiseSchedule,
) -> Result<ImageBuffer> {
    schedule.check_timestep(t)?;
    if t_prev > t {
        return Err(Error::invalid(
            "t_prev",
            format!("{t_prev} must not exceed t = {t}"),
        ));
    }
    if t_prev == 0 {
        x0.ensure_same_shape(eps)?;
        return Ok(x0.clone());
    }
    let (a, s) = (schedule.alpha(t_prev), schedule.sigma(t_prev));
    x0.zip_map(eps, |x, e| a * x + s * e)
}
