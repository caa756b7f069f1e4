use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use mosaicgen::image::{list_png_dir, resize_bilinear, ImageBuffer};
use mosaicgen::metrics::{eval_report, MetricsReport, DEFAULT_RESOLUTIONS};
use serde_json::json;

use super::{load_rgb, pyramid_levels, require_exists};
use crate::manifest::write_json;
use crate::{usage, CmdResult};

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long = "ref", required_unless_present = "batch")]
    pub reference: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    pub mosaic: Option<PathBuf>,
    /// Directory with `ref/` and `mosaic/` subdirectories, paired by file name.
    #[arg(long, conflicts_with_all = ["reference", "mosaic"])]
    pub batch: Option<PathBuf>,
    /// Report path.
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
    /// Resize the mosaic to the reference size first (otherwise sizes must match).
    #[arg(long)]
    pub downscale: bool,
    /// Comparison heights for PSNR and SSIM.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RESOLUTIONS)]
    pub resolutions: Vec<usize>,
}

fn evaluate(args: &EvalArgs, reference: &ImageBuffer, mosaic: &ImageBuffer, name: &str) -> CmdResult<MetricsReport> {
    let mosaic = if args.downscale {
        resize_bilinear(mosaic, reference.height(), reference.width())?
    } else {
        mosaic.clone()
    };
    if reference.shape() != mosaic.shape() {
        return Err(usage(format!(
            "{name}: reference is {}x{} but mosaic is {}x{} (pass --downscale to resize)",
            reference.height(),
            reference.width(),
            mosaic.height(),
            mosaic.width()
        )));
    }
    let levels = pyramid_levels(reference);
    if levels == 0 {
        return Err(usage(format!("{name}: dimensions must be even for pyramid metrics")));
    }
    Ok(eval_report(reference, &mosaic, &args.resolutions, levels)?)
}

fn pngs_by_name(dir: &Path) -> CmdResult<BTreeMap<String, PathBuf>> {
    require_exists(dir, "directory")?;
    Ok(list_png_dir(dir)?
        .into_iter()
        .filter(|(label, _)| label.is_none())
        .filter_map(|(_, p)| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect())
}

pub fn run(args: &EvalArgs) -> CmdResult {
    if let Some(dir) = &args.batch {
        return run_batch(args, dir);
    }
    let (Some(r), Some(m)) = (&args.reference, &args.mosaic) else {
        return Err(usage("eval needs --ref and --mosaic, or --batch"));
    };
    let report = evaluate(args, &load_rgb(r, "reference")?, &load_rgb(m, "mosaic")?, "pair")?;
    write_json(&args.out, &report)?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

fn run_batch(args: &EvalArgs, dir: &Path) -> CmdResult {
    let refs = pngs_by_name(&dir.join("ref"))?;
    let mosaics = pngs_by_name(&dir.join("mosaic"))?;
    if let Some(name) = refs.keys().find(|n| !mosaics.contains_key(*n)) {
        return Err(usage(format!("batch: {name} has no mosaic")));
    }
    if let Some(name) = mosaics.keys().find(|n| !refs.contains_key(*n)) {
        return Err(usage(format!("batch: {name} has no reference")));
    }
    let mut pairs = Vec::new();
    let mut sums: Vec<(String, f64)> = Vec::new();
    for (name, ref_path) in &refs {
        let reference = load_rgb(ref_path, "reference")?;
        let mosaic = load_rgb(&mosaics[name], "mosaic")?;
        let report = evaluate(args, &reference, &mosaic, name)?;
        let entries = report.entries();
        if sums.is_empty() {
            sums = entries.iter().map(|(k, _)| (k.clone(), 0.0)).collect();
        }
        if entries.len() != sums.len() || entries.iter().zip(&sums).any(|(a, b)| a.0 != b.0) {
            return Err(usage(format!("batch: {name} yields different metric keys (pyramid depth)")));
        }
        for ((_, v), (_, s)) in entries.iter().zip(sums.iter_mut()) {
            *s += v;
        }
        pairs.push(json!({ "name": name, "metrics": report }));
    }
    let n = pairs.len() as f64;
    let mean: serde_json::Map<String, serde_json::Value> =
        sums.into_iter().map(|(k, s)| (k, json!(s / n))).collect();
    write_json(&args.out, &json!({ "count": pairs.len(), "mean": mean, "pairs": pairs }))?;
    log::info!("wrote {} ({} pairs)", args.out.display(), pairs.len());
    Ok(())
}
