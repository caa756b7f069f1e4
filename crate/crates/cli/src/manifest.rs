//! Run manifests: everything needed to reproduce a command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::CmdResult;

#[derive(Serialize)]
pub struct Versions {
    pub mosaicgen: &'static str,
    pub cli: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            mosaicgen: mosaicgen::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: &'static str,
    pub versions: Versions,
    /// Fully resolved settings, defaults included.
    pub config: C,
    pub seeds: Value,
    pub inputs: BTreeMap<&'static str, String>,
    pub outputs: BTreeMap<&'static str, String>,
    /// Wall time per stage, seconds.
    pub timings: BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, config: C) -> Self {
        Self {
            command,
            versions: Versions::default(),
            config,
            seeds: Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: BTreeMap::new(),
            details: Value::Null,
        }
    }
}

/// Times consecutive stages.
pub struct Stopwatch {
    last: Instant,
    pub laps: BTreeMap<&'static str, f64>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    pub fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.laps.insert(stage, (now - self.last).as_secs_f64());
        self.last = now;
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
