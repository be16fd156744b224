//! Run reports, summary statistics and input hashing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::to_json;
use crate::error::{Error, Result};

/// Mean and population standard deviation of a set of accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_acc: f64,
    pub test_obs_acc: Option<f64>,
    pub test_ind_acc: Option<f64>,
}

/// Aggregate over seeds for one (dataset, variant, grid cell).
///
/// Wall-clock time lives in a sibling `timing.json` so that the report
/// itself stays byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub dataset: String,
    pub mode: String,
    pub variant: String,
    pub input_hash: String,
    pub config: serde_json::Value,
    pub seeds: Vec<SeedMetrics>,
    pub val: Option<Stat>,
    pub test_obs: Option<Stat>,
    pub test_ind: Option<Stat>,
}

impl RunReport {
    pub fn new(
        command: &str,
        dataset: &str,
        mode: &str,
        variant: &str,
        input_hash: String,
        config: serde_json::Value,
        seeds: Vec<SeedMetrics>,
    ) -> Self {
        let collect = |f: fn(&SeedMetrics) -> Option<f64>| -> Option<Stat> {
            let v: Vec<f64> = seeds.iter().filter_map(f).collect();
            if v.len() == seeds.len() {
                Stat::of(&v)
            } else {
                None
            }
        };
        Self {
            command: command.into(),
            dataset: dataset.into(),
            mode: mode.into(),
            variant: variant.into(),
            input_hash,
            config,
            val: collect(|s| Some(s.val_acc)),
            test_obs: collect(|s| s.test_obs_acc),
            test_ind: collect(|s| s.test_ind_acc),
            seeds,
        }
    }

    /// The headline metric: test_ind for inductive runs, test_obs otherwise.
    pub fn primary(&self) -> Option<Stat> {
        if self.mode == "inductive" {
            self.test_ind
        } else {
            self.test_obs
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::load(path, e.line(), e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).map_err(|e| Error::input(e.to_string()))?);
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_timing(path: &Path, seconds: f64) -> Result<()> {
    let mut m = BTreeMap::new();
    m.insert("wall_clock_secs", seconds);
    write_json(path, &m)
}

/// Incremental SHA-256 over named byte blobs. Each blob is framed by its
/// name and length so that concatenations cannot collide.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn add(&mut self, name: &str, bytes: &[u8]) -> &mut Self {
        self.0.update((name.len() as u64).to_le_bytes());
        self.0.update(name.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn add_file(&mut self, name: &str, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(self.add(name, &bytes))
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Hash of the files that make up a dataset directory.
pub fn hash_dataset_dir(dir: &Path) -> Result<String> {
    let mut h = InputHasher::default();
    for name in ["manifest.json", "edges.tsv", "features.tsv", "labels.tsv", "splits.json"] {
        let p = dir.join(name);
        if p.exists() {
            h.add_file(name, &p)?;
        }
    }
    Ok(h.finish())
}
