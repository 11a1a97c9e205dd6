//! Curation hyper-parameters and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.25;
pub const DEFAULT_N_MAX: u32 = 20;
pub const DEFAULT_IGNORE_VALUE: u8 = 255;

/// Hyper-parameters shared across the pipeline.
///
/// `alpha` is the tolerance margin on the per-class filtering threshold,
/// `n_max` caps the number of synthetic images sampled for a single mask,
/// and `ignore_value` is the label sentinel excluded from every statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationConfig {
    pub num_classes: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default = "default_ignore_value")]
    pub ignore_value: u8,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_n_max() -> u32 {
    DEFAULT_N_MAX
}
fn default_ignore_value() -> u8 {
    DEFAULT_IGNORE_VALUE
}

impl CurationConfig {
    pub fn new(num_classes: usize) -> Self {
        CurationConfig {
            num_classes,
            alpha: DEFAULT_ALPHA,
            n_max: DEFAULT_N_MAX,
            ignore_value: DEFAULT_IGNORE_VALUE,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > 255 {
            return Err(Error::Config(format!(
                "num_classes must be in [1, 255], got {}",
                self.num_classes
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be a positive finite real, got {}",
                self.alpha
            )));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be >= 1".into()));
        }
        if (self.ignore_value as usize) < self.num_classes {
            return Err(Error::Config(format!(
                "ignore_value {} collides with class range [0, {})",
                self.ignore_value, self.num_classes
            )));
        }
        Ok(())
    }
}
