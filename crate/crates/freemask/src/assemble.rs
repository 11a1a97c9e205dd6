//! Sampling manifests and training plans.
//!
//! The manifest fixes, per ranked mask, how many synthetic images to draw and
//! with which seeds. Seeds come from one shared fixed sequence, so the i-th
//! sample of every mask uses the same seed. Plans are declarative artifacts
//! consumed by external training scripts; nothing here runs training.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::config::CurationConfig;
use crate::error::{Error, Result};
use crate::hardness::{sample_count, RankedMasks};
use crate::seed::{splitmix64, SplitMix64};

/// The shared seed sequence: `splitmix64(base_seed + i)` for i in 0..n_max.
pub fn fixed_seed_sequence(base_seed: u64, n_max: u32) -> Vec<u64> {
    (0..n_max as u64)
        .map(|i| splitmix64(base_seed.wrapping_add(i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub mask_id: String,
    pub rank: usize,
    pub hardness: f64,
    pub count: u32,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingManifest {
    pub version: u32,
    pub n_max: u32,
    pub base_seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl SamplingManifest {
    pub fn total_synthetic(&self) -> u64 {
        self.entries.iter().map(|e| e.count as u64).sum()
    }

    pub fn to_json_path(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })
    }
}

pub fn build_manifest(ranked: &RankedMasks, config: &CurationConfig) -> Result<SamplingManifest> {
    if ranked.is_empty() {
        return Err(Error::Validation("no ranked masks to build a manifest from".into()));
    }
    let n = ranked.len();
    let seeds = fixed_seed_sequence(config.base_seed, config.n_max);
    let entries = ranked
        .entries()
        .iter()
        .enumerate()
        .map(|(rank, r)| {
            let count = sample_count(rank, n, config.n_max)?;
            Ok(ManifestEntry {
                mask_id: r.mask_id.clone(),
                rank,
                hardness: r.hardness,
                count,
                seeds: seeds[..count as usize].to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplingManifest {
        version: 1,
        n_max: config.n_max,
        base_seed: config.base_seed,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Joint,
    PretrainFinetune,
}

/// Declarative composition of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub mode: PlanMode,
    pub iteration_multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub finetune_lr_factor: Option<f64>,
    pub real_entries: Vec<String>,
    /// (mask_id, seed) pairs, rank-major then seed order.
    pub synthetic_entries: Vec<(String, u64)>,
}

fn synthetic_entries(manifest: &SamplingManifest) -> Vec<(String, u64)> {
    manifest
        .entries
        .iter()
        .flat_map(|e| e.seeds.iter().map(|&s| (e.mask_id.clone(), s)))
        .collect()
}

/// Joint training: real ids over-sampled to synthetic parity. Each id gets
/// floor(S/R) copies; the S mod R extras are picked by a seeded shuffle
/// without replacement.
pub fn joint_training_plan(
    real_ids: &[String],
    manifest: &SamplingManifest,
    shuffle_seed: u64,
) -> Result<TrainingPlan> {
    if real_ids.is_empty() {
        return Err(Error::Validation("joint plan needs at least one real id".into()));
    }
    let synthetic = synthetic_entries(manifest);
    let s = synthetic.len();
    let r = real_ids.len();
    let base = s / r;
    let rem = s % r;

    let mut sorted: Vec<String> = real_ids.to_vec();
    sorted.sort();
    let mut real_entries = Vec::with_capacity(s);
    for id in &sorted {
        real_entries.extend(std::iter::repeat_n(id.clone(), base));
    }
    if rem > 0 {
        let mut pool = sorted.clone();
        let mut rng = SplitMix64::new(shuffle_seed);
        rng.shuffle(&mut pool);
        real_entries.extend(pool.into_iter().take(rem));
    }
    Ok(TrainingPlan {
        mode: PlanMode::Joint,
        iteration_multiplier: 2.0,
        finetune_lr_factor: None,
        real_entries,
        synthetic_entries: synthetic,
    })
}

/// Synthetic pre-training followed by real fine-tuning at half the base
/// learning rate; real ids are listed once each.
pub fn pretrain_plan(real_ids: &[String], manifest: &SamplingManifest) -> Result<TrainingPlan> {
    if real_ids.is_empty() {
        return Err(Error::Validation("pretrain plan needs at least one real id".into()));
    }
    Ok(TrainingPlan {
        mode: PlanMode::PretrainFinetune,
        iteration_multiplier: 1.0,
        finetune_lr_factor: Some(0.5),
        real_entries: real_ids.to_vec(),
        synthetic_entries: synthetic_entries(manifest),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanHeader {
    mode: PlanMode,
    iteration_multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    finetune_lr_factor: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanRecord {
    source: String,
    id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    seed: Option<u64>,
}

/// JSON Lines: a header record with the schedule fields, then one record per
/// training sample.
pub fn write_plan_jsonl<W: Write>(plan: &TrainingPlan, mut writer: W) -> std::io::Result<()> {
    let header = PlanHeader {
        mode: plan.mode,
        iteration_multiplier: plan.iteration_multiplier,
        finetune_lr_factor: plan.finetune_lr_factor,
    };
    writeln!(writer, "{}", serde_json::to_string(&header)?)?;
    for id in &plan.real_entries {
        let rec = PlanRecord {
            source: "real".into(),
            id: id.clone(),
            seed: None,
        };
        writeln!(writer, "{}", serde_json::to_string(&rec)?)?;
    }
    for (id, seed) in &plan.synthetic_entries {
        let rec = PlanRecord {
            source: "synthetic".into(),
            id: id.clone(),
            seed: Some(*seed),
        };
        writeln!(writer, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

pub fn write_plan_path(plan: &TrainingPlan, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plan_jsonl(plan, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_plan_path(path: &Path) -> Result<TrainingPlan> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Validation(format!("{}: empty plan file", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: PlanHeader = serde_json::from_str(&header_line).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    let mut real_entries = Vec::new();
    let mut synthetic_entries = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PlanRecord = serde_json::from_str(&line).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
        match rec.source.as_str() {
            "real" => real_entries.push(rec.id),
            "synthetic" => {
                let seed = rec.seed.ok_or_else(|| {
                    Error::Validation(format!(
                        "{}: synthetic record '{}' has no seed",
                        path.display(),
                        rec.id
                    ))
                })?;
                synthetic_entries.push((rec.id, seed));
            }
            other => {
                return Err(Error::Validation(format!(
                    "{}: unknown plan record source '{other}'",
                    path.display()
                )))
            }
        }
    }
    Ok(TrainingPlan {
        mode: header.mode,
        iteration_multiplier: header.iteration_multiplier,
        finetune_lr_factor: header.finetune_lr_factor,
        real_entries,
        synthetic_entries,
    })
}
