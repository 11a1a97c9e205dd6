//! Dense per-pixel grids: label maps, loss maps, and probability maps.
//!
//! All grids are row-major and immutable after construction; constructors
//! enforce the type invariants so downstream code never re-checks them.

use crate::config::CurationConfig;
use crate::error::{Error, Result};

/// Dense grid of class indices. Values are either `< num_classes` or the
/// ignore sentinel from the [`CurationConfig`] the map was validated against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, data: Vec<u8>, config: &CurationConfig) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "label map dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "label map payload length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        for (k, &v) in data.iter().enumerate() {
            if (v as usize) >= config.num_classes && v != config.ignore_value {
                return Err(Error::Validation(format!(
                    "label value {} at pixel {} is neither < {} nor the ignore value {}",
                    v, k, config.num_classes, config.ignore_value
                )));
            }
        }
        Ok(LabelMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    /// Same grid with some pixels replaced; used by the filter, which only
    /// ever rewrites pixels to the ignore value, so invariants are preserved.
    pub(crate) fn with_data(&self, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        LabelMap {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Dense grid of finite, non-negative per-pixel losses in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl LossMap {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "loss map dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "loss map payload length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        for (k, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "loss value {v} at pixel {k} is not a finite non-negative real"
                )));
            }
        }
        Ok(LossMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Per-pixel probability vectors over `num_classes` classes, stored as a
/// (K, H, W) grid: `data[j * H*W + k]` is class j's probability at pixel k.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: u32,
    height: u32,
    num_classes: usize,
    data: Vec<f32>,
}

const PROB_SUM_TOLERANCE: f32 = 1e-5;

impl ProbMap {
    pub fn new(width: u32, height: u32, num_classes: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || num_classes == 0 {
            return Err(Error::Validation(format!(
                "probability map shape must be positive, got ({num_classes}, {height}, {width})"
            )));
        }
        let plane = width as usize * height as usize;
        if data.len() != plane * num_classes {
            return Err(Error::Validation(format!(
                "probability map payload length {} != {}x{}x{}",
                data.len(),
                num_classes,
                height,
                width
            )));
        }
        for k in 0..plane {
            let mut sum = 0.0f32;
            for j in 0..num_classes {
                let v = data[j * plane + k];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "probability {v} for class {j} at pixel {k} is invalid"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "probability vector at pixel {k} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(ProbMap {
            width,
            height,
            num_classes,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Probability of class `class` at flat pixel index `k`.
    pub fn prob(&self, class: usize, k: usize) -> f32 {
        self.data[class * (self.width as usize * self.height as usize) + k]
    }
}

pub(crate) fn check_dims(
    a_width: u32,
    a_height: u32,
    b_width: u32,
    b_height: u32,
) -> Result<()> {
    if a_width != b_width || a_height != b_height {
        return Err(Error::Shape {
            expected_width: a_width,
            expected_height: a_height,
            width: b_width,
            height: b_height,
        });
    }
    Ok(())
}
