//! Deterministic scene generator with planted noisy pixels.
//!
//! Labels come from seeded Voronoi blobs, clean losses from a clipped
//! normal around each class base mean (relative sigma 0.05), and a seeded
//! subset of pixels is planted with loss = noise_multiplier * class mean.
//! The planted truth grid is the oracle against which filtering precision
//! and recall are measured.

use std::path::Path;

use crate::codec;
use crate::config::CurationConfig;
use crate::error::{Error, Result};
use crate::maps::{check_dims, LabelMap, LossMap};
use crate::seed::{splitmix64, SplitMix64};

const RELATIVE_SIGMA: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub num_classes: usize,
    /// Per-class clean-loss base means in nats, all positive.
    pub class_means: Vec<f64>,
    pub noise_fraction: f64,
    pub noise_multiplier: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("scene dimensions must be positive".into()));
        }
        if self.num_classes == 0 || self.num_classes > 255 {
            return Err(Error::Validation(format!(
                "num_classes must be in [1, 255], got {}",
                self.num_classes
            )));
        }
        if self.class_means.len() != self.num_classes {
            return Err(Error::Validation(format!(
                "{} class means for {} classes",
                self.class_means.len(),
                self.num_classes
            )));
        }
        if self.class_means.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::Validation("class means must be positive and finite".into()));
        }
        if !(0.0..=0.1).contains(&self.noise_fraction) {
            return Err(Error::Validation(format!(
                "noise_fraction must lie in [0, 0.1], got {}",
                self.noise_fraction
            )));
        }
        if self.noise_multiplier < 3.0 {
            return Err(Error::Validation(format!(
                "noise_multiplier must be >= 3, got {}",
                self.noise_multiplier
            )));
        }
        // Planted losses must stay separable when the class mean is inflated
        // by the planted pixels themselves, for any alpha <= 2.
        if self.noise_multiplier * (1.0 - self.noise_fraction) <= 2.0 {
            return Err(Error::Validation(
                "noise_multiplier * (1 - noise_fraction) must exceed 2".into(),
            ));
        }
        Ok(())
    }

    /// Uniform class means; the common case for test scenes.
    pub fn uniform(width: u32, height: u32, num_classes: usize, seed: u64) -> Self {
        // Spread means over [0.2, 1.2] so classes are distinguishable.
        let class_means = (0..num_classes)
            .map(|j| 0.2 + j as f64 / num_classes as f64)
            .collect();
        SceneSpec {
            width,
            height,
            num_classes,
            class_means,
            noise_fraction: 0.03,
            noise_multiplier: 5.0,
            seed,
        }
    }
}

/// Boolean grid marking planted-noise pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedTruth {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl PlantedTruth {
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn planted_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Written as an 8-bit PNG with 255 at planted pixels and 0 elsewhere.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let cfg = CurationConfig::new(1); // values 0 and 255 both valid
        let map = LabelMap::new(self.width, self.height, bytes, &cfg)?;
        codec::write_label_map(&map, path)
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let cfg = CurationConfig::new(1);
        let map = codec::read_label_map(path, &cfg)?;
        Ok(PlantedTruth {
            width: map.width(),
            height: map.height(),
            data: map.data().iter().map(|&v| v == 255).collect(),
        })
    }
}

/// Generates one scene; fully reproducible from the spec alone.
pub fn generate_scene(spec: &SceneSpec) -> Result<(LabelMap, LossMap, PlantedTruth)> {
    spec.validate()?;
    let w = spec.width as usize;
    let h = spec.height as usize;
    let mut rng = SplitMix64::new(splitmix64(spec.seed));

    // Voronoi sites, each carrying a class; cycling guarantees every class
    // has at least one site.
    let num_sites = (spec.num_classes * 3).max(8);
    let sites: Vec<(f64, f64, u8)> = (0..num_sites)
        .map(|i| {
            let x = rng.next_f64() * w as f64;
            let y = rng.next_f64() * h as f64;
            (x, y, (i % spec.num_classes) as u8)
        })
        .collect();

    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, &(sx, sy, _)) in sites.iter().enumerate() {
                let d = (px - sx).powi(2) + (py - sy).powi(2);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            labels.push(sites[best].2);
        }
    }

    let mut losses = Vec::with_capacity(w * h);
    let mut truth = vec![false; w * h];
    for (k, &label) in labels.iter().enumerate() {
        let mean = spec.class_means[label as usize];
        let clean = (mean * (1.0 + RELATIVE_SIGMA * rng.next_gaussian())).max(0.0);
        let planted = rng.next_f64() < spec.noise_fraction;
        if planted {
            truth[k] = true;
            losses.push((spec.noise_multiplier * mean) as f32);
        } else {
            losses.push(clean as f32);
        }
    }

    let cfg = CurationConfig::new(spec.num_classes);
    let label_map = LabelMap::new(spec.width, spec.height, labels, &cfg)?;
    let loss_map = LossMap::new(spec.width, spec.height, losses)?;
    Ok((
        label_map,
        loss_map,
        PlantedTruth {
            width: spec.width,
            height: spec.height,
            data: truth,
        },
    ))
}

/// Writes `masks/`, `losses/`, and `truth/` for `num_scenes` scenes derived
/// from `spec` with seeds `spec.seed + i`.
pub fn generate_dataset(spec: &SceneSpec, num_scenes: usize, root: &Path) -> Result<()> {
    for sub in ["masks", "losses", "truth"] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for i in 0..num_scenes {
        let mut scene_spec = spec.clone();
        scene_spec.seed = spec.seed.wrapping_add(i as u64);
        let (labels, losses, truth) = generate_scene(&scene_spec)?;
        let stem = format!("scene_{i:04}");
        codec::write_label_map(&labels, &root.join("masks").join(format!("{stem}.png")))?;
        codec::write_loss_map(&losses, &root.join("losses").join(format!("{stem}.npy")))?;
        truth.write_png(&root.join("truth").join(format!("{stem}.png")))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterEval {
    /// Fraction of newly ignored pixels that were planted; absent when
    /// nothing was filtered.
    pub precision: Option<f64>,
    /// Fraction of planted pixels that were filtered; absent when nothing
    /// was planted.
    pub recall: Option<f64>,
}

/// Scores a filtered map against the planted truth.
pub fn evaluate_filter(
    predicted: &LabelMap,
    original: &LabelMap,
    truth: &PlantedTruth,
    ignore_value: u8,
) -> Result<FilterEval> {
    check_dims(original.width(), original.height(), predicted.width(), predicted.height())?;
    check_dims(original.width(), original.height(), truth.width(), truth.height())?;
    let mut positives = 0u64;
    let mut true_positives = 0u64;
    let mut planted = 0u64;
    for (k, ((&pred, &orig), &is_planted)) in predicted
        .data()
        .iter()
        .zip(original.data())
        .zip(truth.data())
        .enumerate()
    {
        if is_planted {
            planted += 1;
        }
        if pred == orig {
            continue;
        }
        if pred != ignore_value || orig == ignore_value {
            return Err(Error::Validation(format!(
                "pixel {k} changed from {orig} to {pred}; filtering may only set pixels to ignore"
            )));
        }
        positives += 1;
        if is_planted {
            true_positives += 1;
        }
    }
    Ok(FilterEval {
        precision: (positives > 0).then(|| true_positives as f64 / positives as f64),
        recall: (planted > 0).then(|| true_positives as f64 / planted as f64),
    })
}
