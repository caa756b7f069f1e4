//! Noise schedule, DDIM stepping, classifier-free guidance and the exact
//! exemplar denoiser.

mod denoiser;
mod sampler;
mod schedule;

pub use denoiser::{
    exemplar_denoise, posterior_weights, Condition, ConditionTag, Denoiser, ExemplarDenoiser,
    ExemplarPool, ExemplarPosterior, UNLABELED,
};
pub use sampler::{
    cfg_combine, ddim_step, derive_eps, predict_x0, to_prediction, Parameterization,
};
pub use schedule::{NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TRAIN_STEPS};
