use std::fmt::Write as _;
use std::fs;

use clap::Args;
use mosaicgen::image::save_image;
use mosaicgen::metrics::{psnr, pyramid_error, ssim};
use mosaicgen::pipeline::{downscale_to, generate_mosaic, MosaicConfig};
use serde_json::json;

use super::{create_dir, load_pool, load_rgb, pyramid_levels, resolve_config, tile_shape};
use crate::manifest::{display, write_json, RunManifest, Stopwatch};
use crate::{usage, CmdResult, RunArgs};

pub const DEFAULT_SWEEP: [f64; 6] = [0.0, 500.0, 2000.0, 5000.0, 10000.0, 20000.0];
pub const CSV_HEADER: &str = "w0,seed,e1,e2,e3,e4,psnr,ssim";

#[derive(Args, Debug, Clone)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Guidance weights to try.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    pub sweep: Vec<f64>,
    /// Seed set shared by every weight; `--seed` alone means just that seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

pub fn run(args: &AblateArgs) -> CmdResult {
    let mut clock = Stopwatch::start();
    if args.run.w0.is_some() {
        return Err(usage("ablate sweeps w0; use --sweep instead of --w0"));
    }
    let base = resolve_config(&args.run)?;
    let seeds = match (&args.seeds[..], args.run.seed) {
        ([], Some(seed)) => vec![seed],
        ([], None) => vec![0, 1, 2],
        (list, _) => list.to_vec(),
    };
    if args.sweep.is_empty() {
        return Err(usage("--sweep is empty"));
    }
    let reference = load_rgb(&args.run.reference, "reference")?;
    let shape = tile_shape(&reference, &base)?;
    let pool = load_pool(&args.run.pool, shape)?;
    if pyramid_levels(&reference) < 4 {
        return Err(usage("ablation needs reference dimensions divisible by 16"));
    }
    let cells_dir = args.run.out.join("cells");
    create_dir(&cells_dir)?;
    clock.lap("load");

    let mut csv = format!("{CSV_HEADER}\n");
    for &w0 in &args.sweep {
        for &seed in &seeds {
            let cfg = MosaicConfig {
                w0,
                master_seed: seed,
                ..base.clone()
            };
            cfg.validate()?;
            let result = generate_mosaic(&reference, &pool, &cfg, args.run.threads.threads)?;
            save_image(&result.mosaic, cells_dir.join(format!("w0_{w0}_seed_{seed}.png")))?;
            let small = downscale_to(&result.mosaic, &reference)?;
            let e = pyramid_error(&reference, &small, 4)?;
            let (p, s) = (psnr(&reference, &small)?, ssim(&reference, &small)?);
            writeln!(csv, "{w0},{seed},{},{},{},{},{p},{s}", e[0], e[1], e[2], e[3]).expect("string write");
            log::info!("w0 = {w0}, seed {seed}: E3 = {:.6}, psnr {p:.3}, ssim {s:.4}", e[2]);
        }
    }
    clock.lap("sweep");
    let csv_path = args.run.out.join("ablation.csv");
    fs::write(&csv_path, csv)?;

    let mut manifest = RunManifest::new("ablate", &base);
    manifest.seeds = json!({ "sweep_seeds": seeds });
    manifest.inputs.insert("ref", display(&args.run.reference));
    manifest.inputs.insert("pool", display(&args.run.pool));
    manifest.outputs.insert("csv", display(&csv_path));
    manifest.outputs.insert("cells", display(&cells_dir));
    manifest.timings = clock.laps;
    manifest.details = json!({ "sweep": args.sweep });
    write_json(&args.run.out.join("manifest.json"), &manifest)?;
    log::info!("wrote {}", csv_path.display());
    Ok(())
}
