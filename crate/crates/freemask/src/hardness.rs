//! Mask-level hardness scoring, ranking, and per-rank synthesis counts.
//!
//! A mask's hardness is the sum of the class average losses of its non-ignore
//! pixels, taken from statistics computed on real training pairs. Masks are
//! ranked by hardness descending and the rank-p mask receives
//! `ceil(n_max * (N - p) / N)` synthetic images.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::maps::LabelMap;
use crate::stats::ClassStatsTable;

#[derive(Debug, Clone, PartialEq)]
pub struct HardnessRecord {
    pub mask_id: String,
    /// Pixel-summed hardness in nats; 0 when the mask has no valid pixels.
    pub hardness: f64,
    pub valid_pixels: u64,
    pub unknown_class_pixels: u64,
}

/// Records ordered by hardness descending, ties broken by mask id ascending;
/// ranks run 0..N-1 with no gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMasks {
    entries: Vec<HardnessRecord>,
}

impl RankedMasks {
    /// Rank-ordered records; position in the slice is the rank.
    pub fn entries(&self) -> &[HardnessRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// When `mean_mode` is set, hardness is divided by the valid pixel count
/// (area-normalized); the default is the plain pixel sum.
pub fn mask_hardness(
    mask_id: &str,
    labels: &LabelMap,
    stats: &ClassStatsTable,
    ignore_value: u8,
    mean_mode: bool,
) -> Result<HardnessRecord> {
    let mut hardness = 0.0f64;
    let mut valid_pixels = 0u64;
    let mut unknown_class_pixels = 0u64;
    for &label in labels.data() {
        if label == ignore_value {
            continue;
        }
        let j = label as usize;
        if j >= stats.num_classes {
            return Err(Error::Config(format!(
                "label {j} out of range for stats table with {} classes",
                stats.num_classes
            )));
        }
        valid_pixels += 1;
        match stats.mean(j) {
            Some(h) => hardness += h,
            None => unknown_class_pixels += 1,
        }
    }
    if mean_mode && valid_pixels > 0 {
        hardness /= valid_pixels as f64;
    }
    Ok(HardnessRecord {
        mask_id: mask_id.to_string(),
        hardness,
        valid_pixels,
        unknown_class_pixels,
    })
}

pub fn rank_masks(records: Vec<HardnessRecord>) -> Result<RankedMasks> {
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.mask_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate mask_id '{}'",
                r.mask_id
            )));
        }
    }
    let mut entries = records;
    entries.sort_by(|a, b| {
        b.hardness
            .partial_cmp(&a.hardness)
            .expect("hardness values are finite")
            .then_with(|| a.mask_id.cmp(&b.mask_id))
    });
    Ok(RankedMasks { entries })
}

/// Synthesis count for the rank-p mask: `ceil(n_max * (N - p) / N)`,
/// always in [1, n_max].
pub fn sample_count(p: usize, n: usize, n_max: u32) -> Result<u32> {
    if n == 0 || n_max == 0 {
        return Err(Error::Config(format!(
            "need N >= 1 and n_max >= 1, got N={n}, n_max={n_max}"
        )));
    }
    if p >= n {
        return Err(Error::Validation(format!(
            "rank {p} out of range for {n} masks"
        )));
    }
    let numerator = n_max as u64 * (n - p) as u64;
    Ok(numerator.div_ceil(n as u64) as u32)
}

/// Writes `mask_id,rank,hardness,valid_pixels,unknown_class_pixels,count`.
/// The count column stays empty until counts are assigned by a manifest.
pub fn write_hardness_csv(
    ranked: &RankedMasks,
    counts: Option<&[u32]>,
    path: &Path,
) -> Result<()> {
    if let Some(counts) = counts {
        debug_assert_eq!(counts.len(), ranked.len());
    }
    let mut out = String::from("mask_id,rank,hardness,valid_pixels,unknown_class_pixels,count\n");
    for (rank, r) in ranked.entries().iter().enumerate() {
        let count = counts.map(|c| c[rank].to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.mask_id, rank, r.hardness, r.valid_pixels, r.unknown_class_pixels, count
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_hardness_csv(path: &Path) -> Result<RankedMasks> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line_no == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Validation(format!(
                "{}: line {} has {} fields, expected 6",
                path.display(),
                line_no + 1,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Validation(format!(
                "{}: line {}: unparseable {what}",
                path.display(),
                line_no + 1
            ))
        };
        let rank: usize = fields[1].parse().map_err(|_| parse_err("rank"))?;
        if rank != records.len() {
            return Err(Error::Validation(format!(
                "{}: rank {} at line {} breaks the 0..N-1 sequence",
                path.display(),
                rank,
                line_no + 1
            )));
        }
        records.push(HardnessRecord {
            mask_id: fields[0].to_string(),
            hardness: fields[2].parse().map_err(|_| parse_err("hardness"))?,
            valid_pixels: fields[3].parse().map_err(|_| parse_err("valid_pixels"))?,
            unknown_class_pixels: fields[4]
                .parse()
                .map_err(|_| parse_err("unknown_class_pixels"))?,
        });
    }
    if records.is_empty() {
        return Err(Error::Validation(format!(
            "{}: hardness table has no rows",
            path.display()
        )));
    }
    // Re-validate the ordering invariant rather than trusting the file.
    for w in records.windows(2) {
        let in_order = w[0].hardness > w[1].hardness
            || (w[0].hardness == w[1].hardness && w[0].mask_id < w[1].mask_id);
        if !in_order {
            return Err(Error::Validation(format!(
                "{}: rows '{}' and '{}' violate the rank order",
                path.display(),
                w[0].mask_id,
                w[1].mask_id
            )));
        }
    }
    Ok(RankedMasks { entries: records })
}

/// Convenience used by the CLI: hardness table rendered to any writer.
pub fn render_hardness_csv<W: Write>(
    ranked: &RankedMasks,
    counts: Option<&[u32]>,
    mut writer: W,
) -> std::io::Result<()> {
    writeln!(
        writer,
        "mask_id,rank,hardness,valid_pixels,unknown_class_pixels,count"
    )?;
    for (rank, r) in ranked.entries().iter().enumerate() {
        let count = counts.map(|c| c[rank].to_string()).unwrap_or_default();
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            r.mask_id, rank, r.hardness, r.valid_pixels, r.unknown_class_pixels, count
        )?;
    }
    Ok(())
}
