//! The series store written by `ingest`: a manifest plus one CSV per user.
//!
//! ```text
//! <store>/manifest.json
//! <store>/series/<user>.csv    timestamp,consumption,temperature
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use drlatent::data::{AdfResult, ConsumptionSeries, Exclusion, Sample, ScalingRecord, UserMeta};
use drlatent::Hour;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{self, file_stem};
use crate::UsageError;

pub const SERIES_HEADER: &str = "timestamp,consumption,temperature";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEntry {
    pub user_id: String,
    pub file: String,
    pub start: Hour,
    pub end: Hour,
    pub hours: usize,
    pub scaling: ScalingRecord,
    pub has_automation: bool,
    pub signup: Option<Hour>,
    /// Shorter aligned pieces that were dropped.
    pub dropped_segments: usize,
    pub adf: Option<AdfResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub users: Vec<UserEntry>,
    pub exclusions: Vec<Exclusion>,
}

/// A user loaded back from the store.
#[derive(Debug, Clone)]
pub struct StoredUser {
    pub series: ConsumptionSeries,
    pub meta: UserMeta,
}

pub fn series_csv(config: &RunConfig, series: &ConsumptionSeries) -> Vec<u8> {
    let mut buf = output::csv(config, SERIES_HEADER);
    for s in series.samples() {
        buf.extend_from_slice(format!("{},{},{}\n", s.timestamp, s.consumption, s.temperature).as_bytes());
    }
    buf
}

pub fn write_manifest(config: &RunConfig, dir: &Path, manifest: &Manifest) -> anyhow::Result<()> {
    output::write(&dir.join("manifest.json"), output::json(config, manifest)?)
}

pub fn series_path(dir: &Path, user_id: &str) -> (String, PathBuf) {
    let file = format!("series/{}.csv", file_stem(user_id));
    let path = dir.join(&file);
    (file, path)
}

fn bad(path: &Path, line: usize, msg: impl std::fmt::Display) -> anyhow::Error {
    UsageError(format!("{}:{}: {msg}", path.display(), line)).into()
}

fn read_series(path: &Path, entry: &UserEntry) -> anyhow::Result<ConsumptionSeries> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut samples = Vec::with_capacity(entry.hours);
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !header_seen {
            if line != SERIES_HEADER {
                return Err(bad(path, i + 1, format!("expected header {SERIES_HEADER}")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad(path, i + 1, "expected 3 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(path, i + 1, e));
        samples.push(Sample {
            timestamp: Hour::parse(f[0]).map_err(|e| bad(path, i + 1, e))?,
            consumption: num(f[1])?,
            temperature: num(f[2])?,
        });
    }
    ConsumptionSeries::new(entry.user_id.clone(), samples, entry.scaling).map_err(|e| bad(path, 0, e))
}

pub fn load(dir: &Path) -> anyhow::Result<(Manifest, Vec<StoredUser>)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let users = manifest
        .users
        .iter()
        .map(|entry| {
            let series = read_series(&dir.join(&entry.file), entry)?;
            Ok(StoredUser {
                series,
                meta: UserMeta {
                    has_pv: false,
                    has_automation: entry.has_automation,
                    signup: entry.signup,
                },
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((manifest, users))
}
