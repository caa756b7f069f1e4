use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{center_crop_resize, list_png_dir, load_image, to_rgb, ImageBuffer};

use super::{derive_eps, to_prediction, NoiseSchedule, Parameterization};

/// What the denoiser is asked to produce.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Unconditional,
    Label(String),
}

impl Condition {
    /// `""` and `"-"` mean unconditional; anything else is a label.
    pub fn parse(s: &str) -> Self {
        match s.trim() {
            "" | "-" => Self::Unconditional,
            label => Self::Label(label.to_owned()),
        }
    }
}

/// A condition plus its classifier-free guidance scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionTag {
    pub condition: Condition,
    pub cfg_scale: f64,
}

impl ConditionTag {
    pub fn unconditional() -> Self {
        Self {
            condition: Condition::Unconditional,
            cfg_scale: 1.0,
        }
    }

    pub fn label(label: impl Into<String>, cfg_scale: f64) -> Self {
        Self {
            condition: Condition::Label(label.into()),
            cfg_scale,
        }
    }
}

/// The pluggable noise-prediction network.
///
/// `predict` returns the raw output in [`Denoiser::parameterization`]
/// space and must be deterministic for fixed inputs.
pub trait Denoiser: Sync {
    fn parameterization(&self) -> Parameterization;

    fn predict(&self, z: &ImageBuffer, t: usize, cond: &Condition) -> Result<ImageBuffer>;

    /// Vector-Jacobian product of the full map `z ↦ x̂0(z)` with
    /// `cotangent`. Only denoisers with an analytic form can offer this.
    fn x0_vjp(
        &self,
        _z: &ImageBuffer,
        _t: usize,
        _cond: &Condition,
        _cotangent: &ImageBuffer,
    ) -> Result<ImageBuffer> {
        Err(Error::invalid(
            "jacobian",
            "this denoiser has no analytic Jacobian",
        ))
    }
}

/// Finite labeled set of clean images; the uniform distribution over it is
/// the data distribution the exemplar denoiser is exact for.
#[derive(Clone, Debug, PartialEq)]
pub struct ExemplarPool {
    exemplars: Vec<ImageBuffer>,
    labels: Vec<String>,
}

/// Label given to PNGs sitting directly in the pool directory.
pub const UNLABELED: &str = "unlabeled";

impl ExemplarPool {
    pub fn new(exemplars: Vec<ImageBuffer>, labels: Vec<String>) -> Result<Self> {
        if exemplars.is_empty() {
            return Err(Error::EmptyPool);
        }
        if labels.len() != exemplars.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} exemplars", labels.len(), exemplars.len()),
            ));
        }
        for e in &exemplars[1..] {
            exemplars[0].ensure_same_shape(e)?;
        }
        Ok(Self { exemplars, labels })
    }

    /// Every exemplar under one label.
    pub fn unlabeled(exemplars: Vec<ImageBuffer>) -> Result<Self> {
        let labels = vec![UNLABELED.to_owned(); exemplars.len()];
        Self::new(exemplars, labels)
    }

    /// Loads every PNG under `dir`; labels are the immediate subdirectory
    /// names. With `shape = Some((c, h, w))` each image is center-cropped and
    /// resized to `h × w` (and gray promoted to RGB when `c = 3`).
    pub fn load_dir(dir: impl AsRef<Path>, shape: Option<(usize, usize, usize)>) -> Result<Self> {
        let mut exemplars = Vec::new();
        let mut labels = Vec::new();
        for (label, path) in list_png_dir(dir.as_ref())? {
            let mut img = load_image(&path)?;
            if let Some((c, h, w)) = shape {
                if c == 3 {
                    img = to_rgb(&img)?;
                }
                img = center_crop_resize(&img, h, w)?;
            }
            exemplars.push(img);
            labels.push(label.unwrap_or_else(|| UNLABELED.to_owned()));
        }
        Self::new(exemplars, labels)
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn exemplars(&self) -> &[ImageBuffer] {
        &self.exemplars
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.exemplars[0].shape()
    }

    /// Distinct labels in first-seen order.
    pub fn distinct_labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for l in &self.labels {
            if !out.contains(&l.as_str()) {
                out.push(l);
            }
        }
        out
    }

    /// Indices selected by `cond`; all of them when unconditional.
    pub fn select(&self, cond: &Condition) -> Result<Vec<usize>> {
        match cond {
            Condition::Unconditional => Ok((0..self.len()).collect()),
            Condition::Label(label) => {
                let idx: Vec<usize> = (0..self.len()).filter(|&i| &self.labels[i] == label).collect();
                if idx.is_empty() {
                    return Err(Error::UnknownLabel(label.clone()));
                }
                Ok(idx)
            }
        }
    }
}

/// Posterior over the selected exemplars given a latent.
#[derive(Clone, Debug)]
pub struct ExemplarPosterior {
    pub x0_hat: ImageBuffer,
    pub eps_hat: ImageBuffer,
    /// Pool indices the posterior ranges over.
    pub indices: Vec<usize>,
    /// Softmax weights, aligned with `indices`.
    pub weights: Vec<f64>,
}

impl ExemplarPosterior {
    /// `(pool index, weight)` of the heaviest exemplar.
    pub fn argmax(&self) -> (usize, f64) {
        let (i, w) = self
            .weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &w)| if w > best.1 { (i, w) } else { best });
        (self.indices[i], w)
    }
}

/// Softmax weights `∝ exp(−‖z − α_t e_i‖² / 2σ_t²)` over `indices`,
/// stabilized by subtracting the largest logit.
pub fn posterior_weights(
    z: &ImageBuffer,
    t: usize,
    pool: &ExemplarPool,
    indices: &[usize],
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>> {
    schedule.check_timestep(t)?;
    z.ensure_same_shape(&pool.exemplars[0])?;
    let (a, s) = (schedule.alpha(t), schedule.sigma(t));
    if s == 0.0 {
        return Err(Error::invalid("t", "sigma_t is zero"));
    }
    let inv = 1.0 / (2.0 * s * s);
    let logits: Vec<f64> = indices
        .iter()
        .map(|&i| {
            let d2: f64 = z
                .data()
                .iter()
                .zip(pool.exemplars[i].data())
                .map(|(zv, ev)| {
                    let d = zv - a * ev;
                    d * d
                })
                .sum();
            -d2 * inv
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

fn weighted_mean(pool: &ExemplarPool, indices: &[usize], weights: &[f64]) -> ImageBuffer {
    let mut out = ImageBuffer::zeros_like(&pool.exemplars[0]);
    for (&i, &w) in indices.iter().zip(weights) {
        if w != 0.0 {
            out.add_scaled(&pool.exemplars[i], w).expect("pool shapes agree");
        }
    }
    out
}

/// Exact posterior mean `E[x0 | z_t]` under the uniform prior over the
/// exemplars selected by `cond`, plus the matching noise estimate.
pub fn exemplar_denoise(
    z: &ImageBuffer,
    t: usize,
    cond: &Condition,
    pool: &ExemplarPool,
    schedule: &NoiseSchedule,
) -> Result<ExemplarPosterior> {
    let indices = pool.select(cond)?;
    let weights = posterior_weights(z, t, pool, &indices, schedule)?;
    let x0_hat = weighted_mean(pool, &indices, &weights);
    let eps_hat = derive_eps(z, &x0_hat, t, schedule)?;
    Ok(ExemplarPosterior {
        x0_hat,
        eps_hat,
        indices,
        weights,
    })
}

/// [`Denoiser`] backed by [`exemplar_denoise`].
#[derive(Clone, Copy, Debug)]
pub struct ExemplarDenoiser<'a> {
    pub pool: &'a ExemplarPool,
    pub schedule: &'a NoiseSchedule,
    pub parameterization: Parameterization,
}

impl<'a> ExemplarDenoiser<'a> {
    pub fn new(
        pool: &'a ExemplarPool,
        schedule: &'a NoiseSchedule,
        parameterization: Parameterization,
    ) -> Self {
        Self {
            pool,
            schedule,
            parameterization,
        }
    }

    pub fn posterior(&self, z: &ImageBuffer, t: usize, cond: &Condition) -> Result<ExemplarPosterior> {
        exemplar_denoise(z, t, cond, self.pool, self.schedule)
    }
}

impl Denoiser for ExemplarDenoiser<'_> {
    fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    fn predict(&self, z: &ImageBuffer, t: usize, cond: &Condition) -> Result<ImageBuffer> {
        let post = self.posterior(z, t, cond)?;
        to_prediction(&post.x0_hat, &post.eps_hat, t, self.schedule, self.parameterization)
    }

    /// `∂x̂0/∂z = (α_t / σ_t²) · Cov_w[e]`, which is symmetric, so the VJP is
    /// `(α_t / σ_t²) Σ_i w_i (e_i − ē) ⟨e_i − ē, r⟩`.
    fn x0_vjp(
        &self,
        z: &ImageBuffer,
        t: usize,
        cond: &Condition,
        cotangent: &ImageBuffer,
    ) -> Result<ImageBuffer> {
        z.ensure_same_shape(cotangent)?;
        let post = self.posterior(z, t, cond)?;
        let mean = &post.x0_hat;
        let r_dot_mean: f64 = cotangent.data().iter().zip(mean.data()).map(|(r, m)| r * m).sum();
        let (a, s) = (self.schedule.alpha(t), self.schedule.sigma(t));
        let scale = a / (s * s);
        // Σ w_i c_i e_i − (Σ w_i c_i) ē, with c_i = ⟨e_i, r⟩ − ⟨ē, r⟩.
        let mut out = ImageBuffer::zeros_like(z);
        let mut coeff_total = 0.0;
        for (&i, &w) in post.indices.iter().zip(&post.weights) {
            let e = &self.pool.exemplars[i];
            let c = e.data().iter().zip(cotangent.data()).map(|(e, r)| e * r).sum::<f64>() - r_dot_mean;
            let k = w * c;
            coeff_total += k;
            out.add_scaled(e, scale * k)?;
        }
        out.add_scaled(mean, -scale * coeff_total)?;
        Ok(out)
    }
}
