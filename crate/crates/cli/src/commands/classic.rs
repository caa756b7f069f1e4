use std::path::PathBuf;

use clap::Args;
use mosaicgen::classic::{classic_mosaic, Adjust, TilePool};
use mosaicgen::image::{list_png_dir, save_image};
use mosaicgen::pipeline::downscale_to;
use serde_json::json;

use super::{create_dir, default_report, load_rgb, require_exists};
use crate::manifest::{display, write_json, RunManifest, Stopwatch};
use crate::CmdResult;

#[derive(Args, Debug, Clone)]
pub struct ClassicArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Tile pool directory (searched one level deep).
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub level: u32,
    /// Color adjustment: none, tone or histogram.
    #[arg(long, visible_alias = "mode", default_value = "none")]
    pub adjust: String,
    /// Maximum uses per pool tile; unlimited when absent.
    #[arg(long)]
    pub max_reuse: Option<usize>,
    /// Pool tiles are center-cropped and resized to this square size.
    #[arg(long, default_value_t = 64)]
    pub tile_size: usize,
}

pub fn run(args: &ClassicArgs) -> CmdResult {
    let mut clock = Stopwatch::start();
    let adjust: Adjust = args.adjust.parse()?;
    let reference = load_rgb(&args.reference, "reference")?;
    require_exists(&args.pool, "pool directory")?;
    let files = list_png_dir(&args.pool)?;
    let mut pool = TilePool::load_dir(&args.pool, args.tile_size, args.tile_size, args.max_reuse)?;
    clock.lap("load");

    let result = classic_mosaic(&reference, &mut pool, args.level, adjust)?;
    clock.lap("match");
    let side = 1usize << args.level;
    for (k, m) in result.matches.iter().enumerate() {
        log::info!(
            "tile {k:4} ({:2},{:2}) <- pool {:3} {} distance {:.6}",
            k / side,
            k % side,
            m.index,
            files[m.index].1.display(),
            m.distance
        );
    }

    create_dir(&args.out)?;
    let mosaic_path = args.out.join("mosaic.png");
    save_image(&result.mosaic, &mosaic_path)?;
    let report = default_report(&reference, &downscale_to(&result.mosaic, &reference)?)?;
    let metrics_path = args.out.join("metrics.json");
    write_json(&metrics_path, &report)?;
    clock.lap("write");

    let mut manifest = RunManifest::new(
        "classic",
        json!({
            "level": args.level,
            "adjust": adjust.to_string(),
            "max_reuse": args.max_reuse,
            "tile_size": args.tile_size,
        }),
    );
    manifest.inputs.insert("ref", display(&args.reference));
    manifest.inputs.insert("pool", display(&args.pool));
    manifest.outputs.insert("mosaic", display(&mosaic_path));
    manifest.outputs.insert("metrics", display(&metrics_path));
    manifest.timings = clock.laps;
    manifest.details = json!({
        "matches": result.matches.iter().enumerate().map(|(k, m)| json!({
            "tile": k,
            "index": m.index,
            "file": display(&files[m.index].1),
            "distance": m.distance,
        })).collect::<Vec<_>>(),
        "usage": pool.usage(),
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    log::info!("wrote {} ({} tiles)", mosaic_path.display(), result.matches.len());
    Ok(())
}
