use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Linear-β DDPM noise schedule.
///
/// Indexed by timestep `t ∈ 0..=T`; `t = 0` is the clean image with
/// `ᾱ_0 = 1`. Signal and noise scales are `α_t = √ᾱ_t`, `σ_t = √(1 − ᾱ_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(train_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if train_steps == 0 {
            return Err(Error::invalid("train_steps", "must be at least 1"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("need 0 < start <= end < 1, got [{beta_start}, {beta_end}]"),
            ));
        }
        let betas: Vec<f64> = (0..train_steps)
            .map(|i| {
                if train_steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (train_steps - 1) as f64
                }
            })
            .collect();
        let mut alpha_bar = Vec::with_capacity(train_steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        let schedule = Self { betas, alpha_bar };
        for t in 0..=train_steps {
            let (a, s) = (schedule.alpha(t), schedule.sigma(t));
            debug_assert!((a * a + s * s - 1.0).abs() < 1e-7);
        }
        Ok(schedule)
    }

    pub fn train_steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `t ∈ 1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha_bar[t].sqrt()
    }

    pub fn sigma(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]).sqrt()
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.train_steps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.train_steps(),
            });
        }
        Ok(())
    }

    /// `steps` evenly spaced timesteps over the training grid, descending,
    /// e.g. 981, 961, …, 1 for 50 of 1000.
    pub fn inference_timesteps(&self, steps: usize) -> Result<Vec<usize>> {
        let total = self.train_steps();
        if steps == 0 || steps > total {
            return Err(Error::invalid(
                "steps",
                format!("{steps} not in 1..={total}"),
            ));
        }
        Ok((0..steps).rev().map(|i| i * total / steps + 1).collect())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_TRAIN_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}
