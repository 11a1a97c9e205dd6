//! Curation engine for densely annotated synthetic segmentation data.
//!
//! The pipeline turns raw synthetic label/loss pairs into training material:
//!
//! 1. [`stats`] computes class-wise average losses over a dataset.
//! 2. [`filter`] rewrites pixels whose loss exceeds the class threshold to
//!    the ignore value.
//! 3. [`hardness`] scores and ranks semantic masks, and maps ranks to
//!    per-mask synthesis counts.
//! 4. [`assemble`] emits sampling manifests with fixed seeds and declarative
//!    joint-training / pre-training plans.
//!
//! [`synthgen`] generates deterministic desk-scale datasets with planted
//! noise, used as the ground-truth oracle in tests; [`cli`] wires everything
//! into the `freemask` binary.

pub mod assemble;
pub mod cli;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod hardness;
pub mod maps;
pub mod report;
pub mod seed;
pub mod stats;
pub mod synthgen;

pub use config::CurationConfig;
pub use error::{Error, Result};
pub use maps::{LabelMap, LossMap, ProbMap};
