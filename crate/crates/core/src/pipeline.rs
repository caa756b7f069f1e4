//! End-to-end generative mosaic: partition the reference, expand one
//! coherent noise field into per-tile latents, then run every tile through
//! a DDIM loop that aligns colors and descends the low-frequency loss at
//! each step.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    cfg_combine, ddim_step, derive_eps, predict_x0, to_prediction, Condition, ConditionTag,
    Denoiser, ExemplarDenoiser, ExemplarPool, NoiseSchedule, Parameterization,
    DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TRAIN_STEPS,
};
use crate::error::{Error, Result};
use crate::guidance::{
    adain_align, compute_stats, guidance_update, target_gradient, ChannelStats, GuidanceState,
    Jacobian, JacobianMode, LowFreqTarget, Objective, ADAIN_EPS,
};
use crate::image::{compose_grid, partition_blocks, resize_bilinear, BlockGrid, ImageBuffer};
use crate::noise::{init_tile_latents, NoiseMode};

/// Every knob of a generative run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosaicConfig {
    /// Mosaic level `L`; the grid is `2^L × 2^L`.
    pub level: u32,
    /// Fine pixels per reference pixel along each axis.
    pub scale: usize,
    /// DDIM inference steps.
    pub steps: usize,
    pub train_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub cfg_scale: f64,
    /// Initial guidance step size.
    pub w0: f64,
    /// Per-step decay of the guidance step size.
    pub gamma: f64,
    /// Low-pass σ in tile pixels; `None` means tile height / 8.
    pub blur_sigma: Option<f64>,
    pub objective: Objective,
    pub adain_enabled: bool,
    /// Run color alignment before the guidance update (otherwise after).
    pub adain_first: bool,
    /// Call the denoiser again after the latent update instead of reusing
    /// its output.
    pub redenoise_after_update: bool,
    pub jacobian_mode: JacobianMode,
    pub noise_mode: NoiseMode,
    pub parameterization: Parameterization,
    pub master_seed: u64,
    /// One condition per tile (row-major), or a single one for all tiles.
    pub labels: Vec<Condition>,
}

impl Default for MosaicConfig {
    fn default() -> Self {
        Self {
            level: 3,
            scale: 4,
            steps: 50,
            train_steps: DEFAULT_TRAIN_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            cfg_scale: 7.5,
            w0: 5000.0,
            gamma: 0.95,
            blur_sigma: None,
            objective: Objective::RgbMse,
            adain_enabled: true,
            adain_first: true,
            redenoise_after_update: false,
            jacobian_mode: JacobianMode::StopGrad,
            noise_mode: NoiseMode::Consistent,
            parameterization: Parameterization::V,
            master_seed: 0,
            labels: vec![Condition::Unconditional],
        }
    }
}

impl MosaicConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.train_steps, self.beta_start, self.beta_end)
    }

    pub fn blur_sigma_for(&self, tile_h: usize) -> f64 {
        self.blur_sigma.unwrap_or(tile_h as f64 / 8.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::invalid("scale", "must be at least 1"));
        }
        if self.steps == 0 || self.steps > self.train_steps {
            return Err(Error::invalid(
                "steps",
                format!("{} not in 1..={}", self.steps, self.train_steps),
            ));
        }
        if !(self.cfg_scale >= 0.0) || !self.cfg_scale.is_finite() {
            return Err(Error::invalid("cfg_scale", "must be finite and >= 0"));
        }
        GuidanceState::new(self.w0, self.gamma, self.blur_sigma.unwrap_or(0.0), self.objective)?;
        if self.labels.is_empty() {
            return Err(Error::invalid("labels", "need at least one condition"));
        }
        self.schedule()?;
        Ok(())
    }

    /// Condition of tile `k` out of `tiles`.
    pub fn tile_condition(&self, k: usize, tiles: usize) -> Result<ConditionTag> {
        let condition = match self.labels.len() {
            1 => self.labels[0].clone(),
            n if n == tiles => self.labels[k].clone(),
            n => {
                return Err(Error::invalid(
                    "labels",
                    format!("{n} labels for {tiles} tiles; give one or one per tile"),
                ))
            }
        };
        Ok(ConditionTag {
            condition,
            cfg_scale: self.cfg_scale,
        })
    }
}

/// Per-tile record of the sampling loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileLog {
    /// Guidance step size in effect at each step: `w0 · γ^n` at step `n`.
    pub weights: Vec<f64>,
    /// Low-frequency loss of the estimate each guidance step descended.
    pub losses: Vec<f64>,
    /// Loss of the returned tile against its block.
    pub final_loss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MosaicResult {
    #[serde(skip)]
    pub mosaic: ImageBuffer,
    #[serde(skip)]
    pub tiles: Vec<ImageBuffer>,
    pub logs: Vec<TileLog>,
    pub config: MosaicConfig,
    pub wall_time_secs: f64,
}

/// Denoiser output with classifier-free guidance folded in.
pub fn guided_prediction(
    denoiser: &dyn Denoiser,
    z: &ImageBuffer,
    t: usize,
    cond: &ConditionTag,
) -> Result<ImageBuffer> {
    match &cond.condition {
        Condition::Unconditional => denoiser.predict(z, t, &Condition::Unconditional),
        c if cond.cfg_scale == 1.0 => denoiser.predict(z, t, c),
        c => {
            let pc = denoiser.predict(z, t, c)?;
            let pu = denoiser.predict(z, t, &Condition::Unconditional)?;
            cfg_combine(&pc, &pu, cond.cfg_scale)
        }
    }
}

fn guided_vjp(
    denoiser: &dyn Denoiser,
    z: &ImageBuffer,
    t: usize,
    cond: &ConditionTag,
    cotangent: &ImageBuffer,
) -> Result<ImageBuffer> {
    match &cond.condition {
        Condition::Unconditional => denoiser.x0_vjp(z, t, &Condition::Unconditional, cotangent),
        c if cond.cfg_scale == 1.0 => denoiser.x0_vjp(z, t, c, cotangent),
        c => {
            let jc = denoiser.x0_vjp(z, t, c, cotangent)?;
            let ju = denoiser.x0_vjp(z, t, &Condition::Unconditional, cotangent)?;
            cfg_combine(&jc, &ju, cond.cfg_scale)
        }
    }
}

/// Inputs of one tile's sampling loop.
pub struct TileJob<'a> {
    /// Reference block resized to tile resolution.
    pub block: &'a ImageBuffer,
    /// Color statistics of the block at its native resolution.
    pub target: &'a ChannelStats,
    pub init_latent: &'a ImageBuffer,
    pub cond: &'a ConditionTag,
}

/// Runs the full step loop for one tile and returns the clamped tile.
pub fn generate_tile(
    job: &TileJob<'_>,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    config: &MosaicConfig,
) -> Result<(ImageBuffer, TileLog)> {
    let param = denoiser.parameterization();
    let block = job.block;
    job.init_latent.ensure_same_shape(block)?;
    let blur_sigma = config.blur_sigma_for(block.height());
    let mut state = GuidanceState::new(config.w0, config.gamma, blur_sigma, config.objective)?;
    let target = LowFreqTarget::new(block, blur_sigma, config.objective)?;
    let timesteps = schedule.inference_timesteps(config.steps)?;

    let mut z = job.init_latent.clone();
    let mut log = TileLog {
        weights: Vec::with_capacity(timesteps.len()),
        losses: Vec::with_capacity(timesteps.len()),
        final_loss: 0.0,
    };

    for (step, &t) in timesteps.iter().enumerate() {
        let t_prev = timesteps.get(step + 1).copied().unwrap_or(0);
        if !z.is_finite() {
            return Err(Error::NonFinite { step, t });
        }
        let pred = guided_prediction(denoiser, &z, t, job.cond)?;
        let mut x0 = predict_x0(&z, &pred, t, schedule, param)?;
        let mut eps = derive_eps(&z, &x0, t, schedule)?;

        let align = |z: &ImageBuffer, x0: &ImageBuffer| -> Result<(ImageBuffer, ImageBuffer)> {
            let aligned = adain_align(x0, job.target, ADAIN_EPS)?;
            let eps = derive_eps(z, &aligned, t, schedule)?;
            Ok((aligned, eps))
        };

        if config.adain_enabled && config.adain_first {
            (x0, eps) = align(&z, &x0)?;
        }

        log.weights.push(state.w);
        if state.w > 0.0 {
            let (loss, grad) = match config.jacobian_mode {
                JacobianMode::StopGrad => target_gradient(
                    &x0,
                    &target,
                    Jacobian::StopGrad {
                        scale: param.x0_z_derivative(t, schedule),
                    },
                )?,
                JacobianMode::Exact => {
                    let vjp = |r: &ImageBuffer| guided_vjp(denoiser, &z, t, job.cond, r);
                    target_gradient(&x0, &target, Jacobian::Exact(&vjp))?
                }
            };
            log.losses.push(loss);
            // Prediction implied by the (possibly aligned) estimate, held
            // fixed across the latent update.
            let frozen = to_prediction(&x0, &eps, t, schedule, param)?;
            (z, state) = guidance_update(&z, &grad, &state)?;
            let pred = if config.redenoise_after_update {
                guided_prediction(denoiser, &z, t, job.cond)?
            } else {
                frozen
            };
            x0 = predict_x0(&z, &pred, t, schedule, param)?;
            eps = derive_eps(&z, &x0, t, schedule)?;
        } else {
            log.losses.push(target.loss(&x0)?);
            state = guidance_update(&z, &z, &state)?.1;
        }

        if config.adain_enabled && !config.adain_first {
            (x0, eps) = align(&z, &x0)?;
        }

        z = ddim_step(&x0, &eps, t, t_prev, schedule)?;
    }
    if !z.is_finite() {
        return Err(Error::NonFinite {
            step: timesteps.len(),
            t: 0,
        });
    }
    let tile = z.clamped(0.0, 1.0);
    log.final_loss = target.loss(&tile)?;
    Ok((tile, log))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Generates a mosaic with an arbitrary denoiser whose samples have shape
/// `tile_shape`, which must be the reference block size times `scale`.
pub fn generate_mosaic_with(
    reference: &ImageBuffer,
    denoiser: &dyn Denoiser,
    config: &MosaicConfig,
    threads: Option<usize>,
) -> Result<MosaicResult> {
    let started = Instant::now();
    config.validate()?;
    let schedule = config.schedule()?;
    let grid = partition_blocks(reference, config.level)?;
    let tile_count = grid.len();
    let (channels, th, tw) = (
        reference.channels(),
        grid.block_h * config.scale,
        grid.block_w * config.scale,
    );
    let conds = (0..tile_count)
        .map(|k| config.tile_condition(k, tile_count))
        .collect::<Result<Vec<_>>>()?;
    let (_, latents) = init_tile_latents(
        reference.shape(),
        config.level,
        config.scale,
        config.master_seed,
        config.noise_mode,
    )?;
    let blocks_up = grid
        .blocks
        .iter()
        .map(|b| resize_bilinear(b, th, tw))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<ChannelStats> = grid.blocks.iter().map(compute_stats).collect();
    debug_assert!(latents.iter().all(|l| l.field.shape() == (channels, th, tw)));

    let outputs = with_threads(threads, || {
        (0..tile_count)
            .into_par_iter()
            .map(|k| {
                let job = TileJob {
                    block: &blocks_up[k],
                    target: &targets[k],
                    init_latent: &latents[k].field,
                    cond: &conds[k],
                };
                generate_tile(&job, denoiser, &schedule, config).map_err(|e| Error::Tile {
                    tile: k,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let (tiles, logs): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let mosaic = compose_grid(&BlockGrid::from_blocks(grid.rows, grid.cols, tiles.clone())?)?;
    Ok(MosaicResult {
        mosaic,
        tiles,
        logs,
        config: config.clone(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// [`generate_mosaic_with`] using the exact exemplar denoiser over `pool`.
pub fn generate_mosaic(
    reference: &ImageBuffer,
    pool: &ExemplarPool,
    config: &MosaicConfig,
    threads: Option<usize>,
) -> Result<MosaicResult> {
    config.validate()?;
    let grid_side = 1usize << config.level;
    let expected = (
        reference.channels(),
        reference.height() / grid_side * config.scale,
        reference.width() / grid_side * config.scale,
    );
    if reference.height().is_multiple_of(grid_side) && reference.width().is_multiple_of(grid_side) && pool.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: pool.shape(),
        });
    }
    for cond in &config.labels {
        pool.select(cond)?;
    }
    let schedule = config.schedule()?;
    let denoiser = ExemplarDenoiser::new(pool, &schedule, config.parameterization);
    generate_mosaic_with(reference, &denoiser, config, threads)
}

/// Resizes a mosaic to the reference's size so the two can be compared.
pub fn downscale_to(mosaic: &ImageBuffer, reference: &ImageBuffer) -> Result<ImageBuffer> {
    resize_bilinear(mosaic, reference.height(), reference.width())
}
