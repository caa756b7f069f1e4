//! Flat `key = value` run configuration.
//!
//! Every key in [`KEYS`] must appear exactly once; `#` starts a comment.
//! `labels` takes a single label (broadcast to every tile), `-` for
//! unconditional sampling, or `@path` naming a grid file with one label per
//! tile in row-major order (relative paths resolve against the config file).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use mosaicgen::diffusion::Condition;
use mosaicgen::pipeline::MosaicConfig;

use crate::{usage, CmdResult, Failure};

pub const KEYS: [&str; 19] = [
    "level",
    "scale",
    "steps",
    "train_steps",
    "beta_start",
    "beta_end",
    "cfg_scale",
    "w0",
    "gamma",
    "blur_sigma",
    "objective",
    "adain",
    "adain_first",
    "redenoise_after_update",
    "jacobian",
    "noise_mode",
    "parameterization",
    "seed",
    "labels",
];

fn value<T: FromStr>(entries: &BTreeMap<String, String>, key: &str) -> CmdResult<T>
where
    T::Err: std::fmt::Display,
{
    let raw = entries
        .get(key)
        .ok_or_else(|| usage(format!("config is missing key `{key}`")))?;
    raw.parse()
        .map_err(|e| usage(format!("config key `{key}`: cannot parse `{raw}`: {e}")))
}

fn parse_labels(raw: &str, base_dir: &Path) -> CmdResult<Vec<Condition>> {
    match raw.strip_prefix('@') {
        Some(file) => {
            let path = base_dir.join(file);
            let text = fs::read_to_string(&path)
                .map_err(|e| usage(format!("config key `labels`: {}: {e}", path.display())))?;
            let labels: Vec<_> = text.split_whitespace().map(Condition::parse).collect();
            if labels.is_empty() {
                return Err(usage(format!("label grid {} is empty", path.display())));
            }
            Ok(labels)
        }
        None => Ok(vec![Condition::parse(raw)]),
    }
}

/// Parses config text; `base_dir` anchors `labels = @file`.
pub fn parse(text: &str, base_dir: &Path) -> CmdResult<MosaicConfig> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(usage(format!("config line {}: unknown key `{key}`", n + 1)));
        }
        if entries.insert(key.to_owned(), raw.trim().to_owned()).is_some() {
            return Err(usage(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
    }
    for key in KEYS {
        if !entries.contains_key(key) {
            return Err(usage(format!("config is missing key `{key}`")));
        }
    }

    let blur_sigma = match entries["blur_sigma"].as_str() {
        "auto" => None,
        _ => Some(value(&entries, "blur_sigma")?),
    };
    let config = MosaicConfig {
        level: value(&entries, "level")?,
        scale: value(&entries, "scale")?,
        steps: value(&entries, "steps")?,
        train_steps: value(&entries, "train_steps")?,
        beta_start: value(&entries, "beta_start")?,
        beta_end: value(&entries, "beta_end")?,
        cfg_scale: value(&entries, "cfg_scale")?,
        w0: value(&entries, "w0")?,
        gamma: value(&entries, "gamma")?,
        blur_sigma,
        objective: value(&entries, "objective")?,
        adain_enabled: value(&entries, "adain")?,
        adain_first: value(&entries, "adain_first")?,
        redenoise_after_update: value(&entries, "redenoise_after_update")?,
        jacobian_mode: value(&entries, "jacobian")?,
        noise_mode: value(&entries, "noise_mode")?,
        parameterization: value(&entries, "parameterization")?,
        master_seed: value(&entries, "seed")?,
        labels: parse_labels(&entries["labels"], base_dir)?,
    };
    Ok(config)
}

/// Loads a config file or the `config` object of a run manifest. Without a
/// path the built-in defaults apply.
pub fn load(path: Option<&Path>) -> CmdResult<MosaicConfig> {
    let Some(path) = path else {
        return Ok(MosaicConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let config = manifest
            .get("config")
            .ok_or_else(|| usage(format!("{}: manifest has no `config`", path.display())))?;
        return serde_json::from_value(config.clone())
            .map_err(|e| usage(format!("{}: config: {e}", path.display())));
    }
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Renders a config in the file format accepted by [`parse`]. A per-tile
/// label list is written out inline only when it broadcasts.
pub fn render(config: &MosaicConfig) -> Result<String, Failure> {
    let labels = match config.labels.as_slice() {
        [Condition::Unconditional] => "-".to_owned(),
        [Condition::Label(l)] => l.clone(),
        _ => return Err(usage("per-tile labels cannot be rendered inline")),
    };
    let blur = config.blur_sigma.map_or("auto".to_owned(), |s| s.to_string());
    Ok(format!(
        "level = {}\nscale = {}\nsteps = {}\ntrain_steps = {}\nbeta_start = {}\nbeta_end = {}\n\
         cfg_scale = {}\nw0 = {}\ngamma = {}\nblur_sigma = {blur}\nobjective = {}\nadain = {}\n\
         adain_first = {}\nredenoise_after_update = {}\njacobian = {}\nnoise_mode = {}\n\
         parameterization = {}\nseed = {}\nlabels = {labels}\n",
        config.level,
        config.scale,
        config.steps,
        config.train_steps,
        config.beta_start,
        config.beta_end,
        config.cfg_scale,
        config.w0,
        config.gamma,
        config.objective,
        config.adain_enabled,
        config.adain_first,
        config.redenoise_after_update,
        config.jacobian_mode,
        config.noise_mode,
        config.parameterization,
        config.master_seed,
    ))
}
