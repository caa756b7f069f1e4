use mosaicgen::image::save_image;
use mosaicgen::noise::{derive_seed, tile_stream_seed, COARSE_STREAM};
use mosaicgen::pipeline::{downscale_to, generate_mosaic};
use serde_json::json;

use super::{create_dir, default_report, load_pool, load_rgb, resolve_config, tile_shape};
use crate::manifest::{display, write_json, RunManifest, Stopwatch};
use crate::{config, CmdResult, RunArgs};

pub fn run(args: &RunArgs) -> CmdResult {
    let mut clock = Stopwatch::start();
    let config = resolve_config(args)?;
    let reference = load_rgb(&args.reference, "reference")?;
    let shape = tile_shape(&reference, &config)?;
    let pool = load_pool(&args.pool, shape)?;
    clock.lap("load");

    log::info!(
        "generating {0}x{0} tiles of {1}x{2}, {3} steps, w0 = {4}, seed {5}",
        1usize << config.level,
        shape.1,
        shape.2,
        config.steps,
        config.w0,
        config.master_seed
    );
    let result = generate_mosaic(&reference, &pool, &config, args.threads.threads)?;
    clock.lap("generate");

    let tiles_dir = args.out.join("tiles");
    create_dir(&tiles_dir)?;
    let mosaic_path = args.out.join("mosaic.png");
    save_image(&result.mosaic, &mosaic_path)?;
    for (k, tile) in result.tiles.iter().enumerate() {
        save_image(tile, tiles_dir.join(format!("tile_{k:04}.png")))?;
    }
    clock.lap("write");

    let report = default_report(&reference, &downscale_to(&result.mosaic, &reference)?)?;
    let metrics_path = args.out.join("metrics.json");
    write_json(&metrics_path, &report)?;
    clock.lap("metrics");

    let tile_count = result.tiles.len();
    let mut manifest = RunManifest::new("generate", &config);
    manifest.seeds = json!({
        "master": config.master_seed,
        "coarse": derive_seed(config.master_seed, COARSE_STREAM),
        "tiles": (0..tile_count).map(|k| tile_stream_seed(config.master_seed, k)).collect::<Vec<_>>(),
    });
    manifest.inputs.insert("ref", display(&args.reference));
    manifest.inputs.insert("pool", display(&args.pool));
    if let Some(cfg) = &args.config {
        manifest.inputs.insert("config", display(cfg));
    }
    manifest.outputs.insert("mosaic", display(&mosaic_path));
    manifest.outputs.insert("tiles", display(&tiles_dir));
    manifest.outputs.insert("metrics", display(&metrics_path));
    manifest.timings = clock.laps;
    manifest.timings.insert("sampling", result.wall_time_secs);
    manifest.details = json!({
        "threads": args.threads.threads,
        "tile_shape": [shape.0, shape.1, shape.2],
        "tiles": result.logs.iter().enumerate().map(|(k, log)| json!({
            "index": k,
            "final_loss": log.final_loss,
            "weights": log.weights,
            "losses": log.losses,
        })).collect::<Vec<_>>(),
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    match config::render(&config) {
        Ok(text) => std::fs::write(args.out.join("config.conf"), text)?,
        Err(_) => log::debug!("per-tile labels; config.conf not written"),
    }
    log::info!(
        "wrote {} ({} tiles); pyramid E1..E{}: {:?}",
        mosaic_path.display(),
        tile_count,
        report.pyramid.len(),
        report.pyramid
    );
    Ok(())
}
