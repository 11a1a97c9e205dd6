//! Noisy-pixel filtering against class-relative loss thresholds.
//!
//! A non-ignore pixel of class j with loss strictly above `h_j * alpha` is
//! rewritten to the ignore value; equality keeps the pixel. Pixels whose
//! class has no defined mean are kept and counted separately.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::codec;
use crate::config::CurationConfig;
use crate::dataset::DatasetIndex;
use crate::error::{Error, Result};
use crate::maps::{check_dims, LabelMap, LossMap};
use crate::stats::ClassStatsTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFilterCount {
    pub id: usize,
    pub total: u64,
    pub filtered: u64,
}

/// Per-class and global filtering tallies for one image or a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub alpha: f64,
    pub classes: Vec<ClassFilterCount>,
    pub filtered_fraction: f64,
    pub undefined_class_pixels: u64,
}

impl FilterReport {
    fn empty(alpha: f64, num_classes: usize) -> Self {
        FilterReport {
            alpha,
            classes: (0..num_classes)
                .map(|id| ClassFilterCount {
                    id,
                    total: 0,
                    filtered: 0,
                })
                .collect(),
            filtered_fraction: 0.0,
            undefined_class_pixels: 0,
        }
    }

    fn recompute_fraction(&mut self) {
        let total: u64 = self.classes.iter().map(|c| c.total).sum();
        let filtered: u64 = self.classes.iter().map(|c| c.filtered).sum();
        self.filtered_fraction = if total == 0 {
            0.0
        } else {
            filtered as f64 / total as f64
        };
    }

    /// Per-class integer sum of two reports taken at the same alpha.
    pub fn add(&mut self, other: &FilterReport) {
        debug_assert_eq!(self.classes.len(), other.classes.len());
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.total += b.total;
            a.filtered += b.filtered;
        }
        self.undefined_class_pixels += other.undefined_class_pixels;
        self.recompute_fraction();
    }

    pub fn to_json_path(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
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

/// Applies the criterion to one image, returning the rewritten map and tallies.
pub fn filter_image(
    labels: &LabelMap,
    losses: &LossMap,
    stats: &ClassStatsTable,
    alpha: f64,
    ignore_value: u8,
) -> Result<(LabelMap, FilterReport)> {
    check_dims(labels.width(), labels.height(), losses.width(), losses.height())?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    let mut report = FilterReport::empty(alpha, stats.num_classes);
    let mut out = labels.data().to_vec();
    for (k, (&label, &loss)) in labels.data().iter().zip(losses.data()).enumerate() {
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
        match stats.mean(j) {
            Some(mean) => {
                report.classes[j].total += 1;
                if (loss as f64) > mean * alpha {
                    out[k] = ignore_value;
                    report.classes[j].filtered += 1;
                }
            }
            None => report.undefined_class_pixels += 1,
        }
    }
    report.recompute_fraction();
    Ok((labels.with_data(out), report))
}

/// Filters every sample, writing one PNG per input stem into `out_dir`.
/// On failure the partially written outputs are removed.
pub fn filter_dataset(
    index: &DatasetIndex,
    stats: &ClassStatsTable,
    alpha: f64,
    out_dir: &Path,
    config: &CurationConfig,
) -> Result<FilterReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let per_image: Vec<Result<FilterReport>> = index
        .records()
        .par_iter()
        .map(|record| {
            let run = || -> Result<FilterReport> {
                let labels = codec::read_label_map(&record.label_path, config)?;
                let losses = match &record.loss_path {
                    Some(p) => codec::read_loss_map(p, (labels.width(), labels.height()))?,
                    None => {
                        return Err(Error::MissingPair {
                            stem: record.sample_id.clone(),
                        })
                    }
                };
                let (filtered, report) =
                    filter_image(&labels, &losses, stats, alpha, config.ignore_value)?;
                let out_path = out_dir.join(format!("{}.png", record.sample_id));
                codec::write_label_map(&filtered, &out_path)?;
                Ok(report)
            };
            run().map_err(|e| e.with_sample(&record.sample_id))
        })
        .collect();

    let mut total = FilterReport::empty(alpha, stats.num_classes);
    for report in per_image {
        match report {
            Ok(r) => total.add(&r),
            Err(e) => {
                for record in index.records() {
                    let _ = std::fs::remove_file(out_dir.join(format!("{}.png", record.sample_id)));
                }
                return Err(e);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ClassAccumulator;

    fn cfg(k: usize) -> CurationConfig {
        CurationConfig::new(k)
    }

    /// Stats table with fixed means; count 1 for defined classes.
    fn table(means: &[Option<f64>]) -> ClassStatsTable {
        let mut acc = ClassAccumulator::new(means.len());
        let mut t = acc.finalize("test");
        for (j, m) in means.iter().enumerate() {
            if let Some(m) = m {
                t.classes[j].count = 1;
                t.classes[j].loss_sum = *m;
                t.classes[j].mean = Some(*m);
            }
        }
        let _ = &mut acc;
        t
    }

    #[test]
    fn strict_inequality_at_the_threshold() {
        let cfg = cfg(2);
        let labels = LabelMap::new(3, 1, vec![1, 1, 1], &cfg).unwrap();
        let losses = LossMap::new(3, 1, vec![1.2, 1.25, 1.3]).unwrap();
        let stats = table(&[None, Some(1.0)]);
        let (filtered, report) = filter_image(&labels, &losses, &stats, 1.25, 255).unwrap();
        assert_eq!(filtered.data(), &[1, 1, 255]);
        assert_eq!(report.classes[1].total, 3);
        assert_eq!(report.classes[1].filtered, 1);
        assert!((report.filtered_fraction - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn huge_alpha_filters_nothing() {
        let cfg = cfg(2);
        let labels = LabelMap::new(2, 2, vec![0, 1, 0, 1], &cfg).unwrap();
        let losses = LossMap::new(2, 2, vec![5.0, 9.0, 0.1, 2.0]).unwrap();
        let stats = table(&[Some(0.5), Some(1.0)]);
        let (filtered, report) = filter_image(&labels, &losses, &stats, 1e18, 255).unwrap();
        assert_eq!(filtered.data(), labels.data());
        assert_eq!(report.filtered_fraction, 0.0);
    }

    #[test]
    fn undefined_class_pixels_are_kept_and_counted() {
        let cfg = cfg(2);
        let labels = LabelMap::new(2, 1, vec![0, 1], &cfg).unwrap();
        let losses = LossMap::new(2, 1, vec![100.0, 0.5]).unwrap();
        let stats = table(&[None, Some(1.0)]);
        let (filtered, report) = filter_image(&labels, &losses, &stats, 1.0, 255).unwrap();
        assert_eq!(filtered.data(), &[0, 1]);
        assert_eq!(report.undefined_class_pixels, 1);
        assert_eq!(report.classes[0].total, 0);
    }

    #[test]
    fn preexisting_ignore_pixels_untouched() {
        let cfg = cfg(1);
        let labels = LabelMap::new(2, 1, vec![255, 0], &cfg).unwrap();
        let losses = LossMap::new(2, 1, vec![99.0, 99.0]).unwrap();
        let stats = table(&[Some(1.0)]);
        let (filtered, report) = filter_image(&labels, &losses, &stats, 1.0, 255).unwrap();
        assert_eq!(filtered.data(), &[255, 255]);
        assert_eq!(report.classes[0].total, 1);
        assert_eq!(report.classes[0].filtered, 1);
    }

    #[test]
    fn idempotent_under_refiltering() {
        let cfg = cfg(2);
        let labels = LabelMap::new(4, 1, vec![0, 1, 0, 1], &cfg).unwrap();
        let losses = LossMap::new(4, 1, vec![0.1, 3.0, 2.0, 0.2]).unwrap();
        let stats = table(&[Some(0.5), Some(1.0)]);
        let (once, r1) = filter_image(&labels, &losses, &stats, 1.25, 255).unwrap();
        let (twice, r2) = filter_image(&once, &losses, &stats, 1.25, 255).unwrap();
        assert_eq!(once, twice);
        assert_eq!(r2.classes.iter().map(|c| c.filtered).sum::<u64>(), 0);
        assert!(r1.classes.iter().map(|c| c.filtered).sum::<u64>() > 0);
    }

    #[test]
    fn report_addition_matches_joint_run() {
        let cfg = cfg(2);
        let stats = table(&[Some(0.5), Some(1.0)]);
        let labels = LabelMap::new(2, 1, vec![0, 1], &cfg).unwrap();
        let la = LossMap::new(2, 1, vec![1.0, 0.2]).unwrap();
        let lb = LossMap::new(2, 1, vec![0.1, 5.0]).unwrap();
        let (_, ra) = filter_image(&labels, &la, &stats, 1.25, 255).unwrap();
        let (_, rb) = filter_image(&labels, &lb, &stats, 1.25, 255).unwrap();
        let mut sum = ra.clone();
        sum.add(&rb);
        assert_eq!(sum.classes[0].total, 2);
        assert_eq!(
            sum.classes.iter().map(|c| c.filtered).sum::<u64>(),
            ra.classes.iter().map(|c| c.filtered).sum::<u64>()
                + rb.classes.iter().map(|c| c.filtered).sum::<u64>()
        );
    }
}
