//! Class-wise average loss statistics.
//!
//! The per-class mean is the ratio of two dataset-wide sums: total loss over
//! pixels of the class and the pixel count. Both decompose per image, so the
//! dataset pass accumulates one subtotal per image and merges them in
//! lexicographic sample-id order for reproducible output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::codec;
use crate::config::CurationConfig;
use crate::dataset::{DatasetIndex, SampleRecord};
use crate::error::{Error, Result};
use crate::maps::{check_dims, LabelMap, LossMap, ProbMap};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Running per-class loss sums and pixel counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccumulator {
    loss_sum: Vec<f64>,
    pixel_count: Vec<u64>,
}

impl ClassAccumulator {
    pub fn new(num_classes: usize) -> Self {
        ClassAccumulator {
            loss_sum: vec![0.0; num_classes],
            pixel_count: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.loss_sum.len()
    }

    /// Adds one image's non-ignore pixels to the running sums.
    pub fn accumulate_image(
        &mut self,
        labels: &LabelMap,
        losses: &LossMap,
        ignore_value: u8,
    ) -> Result<()> {
        check_dims(labels.width(), labels.height(), losses.width(), losses.height())?;
        for (&label, &loss) in labels.data().iter().zip(losses.data()) {
            if label == ignore_value {
                continue;
            }
            let j = label as usize;
            if j >= self.loss_sum.len() {
                return Err(Error::Config(format!(
                    "label {j} out of range for accumulator with {} classes",
                    self.loss_sum.len()
                )));
            }
            self.loss_sum[j] += loss as f64;
            self.pixel_count[j] += 1;
        }
        Ok(())
    }

    /// Elementwise sum of two accumulators built with the same class count.
    pub fn merge(&self, other: &ClassAccumulator) -> Result<ClassAccumulator> {
        if self.num_classes() != other.num_classes() {
            return Err(Error::Config(format!(
                "cannot merge accumulators with {} and {} classes",
                self.num_classes(),
                other.num_classes()
            )));
        }
        let mut out = self.clone();
        for j in 0..out.loss_sum.len() {
            out.loss_sum[j] += other.loss_sum[j];
            out.pixel_count[j] += other.pixel_count[j];
        }
        Ok(out)
    }

    pub fn finalize(&self, provenance: &str) -> ClassStatsTable {
        let classes = self
            .loss_sum
            .iter()
            .zip(&self.pixel_count)
            .enumerate()
            .map(|(id, (&loss_sum, &count))| ClassStats {
                id,
                count,
                loss_sum,
                mean: (count > 0).then(|| loss_sum / count as f64),
            })
            .collect();
        ClassStatsTable {
            version: 1,
            provenance: provenance.to_string(),
            num_classes: self.num_classes(),
            classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub id: usize,
    pub count: u64,
    pub loss_sum: f64,
    /// Average loss in nats; `None` when the class has no pixels.
    pub mean: Option<f64>,
}

/// Per-class average losses with provenance ("synthetic", "real", ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStatsTable {
    pub version: u32,
    pub provenance: String,
    pub num_classes: usize,
    pub classes: Vec<ClassStats>,
}

impl ClassStatsTable {
    /// Mean loss of class `j`, or `None` when undefined or out of range.
    pub fn mean(&self, j: usize) -> Option<f64> {
        self.classes.get(j).and_then(|c| c.mean)
    }

    pub fn to_json_path(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("stats table serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let table: ClassStatsTable = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.into(),
            source: e,
        })?;
        if table.classes.len() != table.num_classes {
            return Err(Error::Validation(format!(
                "{}: stats table lists {} classes but declares {}",
                path.display(),
                table.classes.len(),
                table.num_classes
            )));
        }
        Ok(table)
    }
}

/// Per-pixel cross entropy: `-ln(max(p_label, epsilon))`, 0 at ignore pixels.
pub fn compute_loss_map(
    probs: &ProbMap,
    labels: &LabelMap,
    epsilon: f64,
    ignore_value: u8,
) -> Result<LossMap> {
    check_dims(labels.width(), labels.height(), probs.width(), probs.height())?;
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1e-3], got {epsilon}"
        )));
    }
    let data = labels
        .data()
        .iter()
        .enumerate()
        .map(|(k, &label)| {
            if label == ignore_value {
                0.0
            } else {
                let p = (probs.prob(label as usize, k) as f64).max(epsilon);
                (-p.ln()) as f32
            }
        })
        .collect();
    LossMap::new(labels.width(), labels.height(), data)
}

fn load_losses(record: &SampleRecord, labels: &LabelMap, config: &CurationConfig) -> Result<LossMap> {
    let dims = (labels.width(), labels.height());
    if let Some(loss_path) = &record.loss_path {
        codec::read_loss_map(loss_path, dims)
    } else if let Some(prob_path) = &record.prob_path {
        let probs = codec::read_prob_map(prob_path, dims, config.num_classes)?;
        compute_loss_map(&probs, labels, DEFAULT_EPSILON, config.ignore_value)
    } else {
        Err(Error::MissingPair {
            stem: record.sample_id.clone(),
        })
    }
}

pub(crate) fn sample_accumulator(
    record: &SampleRecord,
    config: &CurationConfig,
) -> Result<ClassAccumulator> {
    let labels = codec::read_label_map(&record.label_path, config)?;
    let losses = load_losses(record, &labels, config)?;
    let mut acc = ClassAccumulator::new(config.num_classes);
    acc.accumulate_image(&labels, &losses, config.ignore_value)?;
    Ok(acc)
}

/// Full dataset pass: per-image subtotals computed in parallel, merged in
/// index (lexicographic) order.
pub fn compute_stats(
    index: &DatasetIndex,
    config: &CurationConfig,
    provenance: &str,
) -> Result<ClassStatsTable> {
    if index.is_empty() {
        return Err(Error::Validation("dataset index is empty".into()));
    }
    let per_image: Vec<Result<ClassAccumulator>> = index
        .records()
        .par_iter()
        .map(|record| sample_accumulator(record, config).map_err(|e| e.with_sample(&record.sample_id)))
        .collect();
    let mut total = ClassAccumulator::new(config.num_classes);
    for acc in per_image {
        total = total.merge(&acc?)?;
    }
    Ok(total.finalize(provenance))
}
