//! Command-line front end: `gen`, `stats`, `loss`, `filter`, `hardness`,
//! `manifest`, `plan`, `report`.
//!
//! Exit codes: 0 success, 1 domain/validation failure, 2 usage error.
//! `FREEMASK_THREADS` caps worker threads; `--config` points at an optional
//! JSON file whose fields mirror the curation config, with flags taking
//! precedence.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::assemble::{self, SamplingManifest};
use crate::codec;
use crate::config::{CurationConfig, DEFAULT_ALPHA, DEFAULT_IGNORE_VALUE, DEFAULT_N_MAX};
use crate::dataset::scan_dataset;
use crate::error::{Error, Result};
use crate::filter::{filter_dataset, FilterReport};
use crate::hardness::{mask_hardness, rank_masks, read_hardness_csv, write_hardness_csv};
use crate::report::{report, report_with_counts};
use crate::stats::{compute_loss_map, compute_stats, ClassStatsTable, DEFAULT_EPSILON};
use crate::synthgen::{generate_dataset, SceneSpec};

#[derive(Parser)]
#[command(name = "freemask", version, about = "Synthetic segmentation data curation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by subcommands that need curation hyper-parameters.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Optional JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of semantic classes K.
    #[arg(long)]
    classes: Option<usize>,
    /// Tolerance margin on the per-class filtering threshold.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Maximum synthetic images per mask.
    #[arg(long = "n-max")]
    n_max: Option<u32>,
    /// Label value excluded from all statistics.
    #[arg(long = "ignore-value")]
    ignore_value: Option<u8>,
    /// Base seed for the fixed seed sequence and shuffles.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    num_classes: Option<usize>,
    alpha: Option<f64>,
    n_max: Option<u32>,
    ignore_value: Option<u8>,
    base_seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<CurationConfig> {
        let file: ConfigFile = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_slice(&bytes).map_err(|e| Error::Json {
                    path: path.clone(),
                    source: e,
                })?
            }
            None => ConfigFile::default(),
        };
        let num_classes = self
            .classes
            .or(file.num_classes)
            .ok_or_else(|| Error::Config("number of classes not set (--classes or config file)".into()))?;
        let config = CurationConfig {
            num_classes,
            alpha: self.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            n_max: self.n_max.or(file.n_max).unwrap_or(DEFAULT_N_MAX),
            ignore_value: self
                .ignore_value
                .or(file.ignore_value)
                .unwrap_or(DEFAULT_IGNORE_VALUE),
            base_seed: self.seed.or(file.base_seed).unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset with planted noise.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        scenes: usize,
        #[arg(long, default_value_t = 64)]
        width: u32,
        #[arg(long, default_value_t = 64)]
        height: u32,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long = "noise-fraction", default_value_t = 0.03)]
        noise_fraction: f64,
        #[arg(long = "noise-multiplier", default_value_t = 5.0)]
        noise_multiplier: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute class-wise average losses over a dataset.
    Stats {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "synthetic")]
        provenance: String,
        /// Force the lexicographic merge order (always on; accepted for
        /// interface stability).
        #[arg(long)]
        deterministic: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Derive cross-entropy loss maps from probability maps.
    Loss {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Rewrite noisy pixels to the ignore value.
    Filter {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score and rank masks by hardness.
    Hardness {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Normalize hardness by the valid pixel count.
        #[arg(long = "mean-mode")]
        mean_mode: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build the sampling manifest from a hardness table.
    Manifest {
        #[arg(long)]
        hardness: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Emit a joint-training or pre-training plan.
    Plan {
        #[arg(long)]
        manifest: PathBuf,
        /// File listing real sample ids, one per line.
        #[arg(long = "real-ids")]
        real_ids: PathBuf,
        #[arg(long, value_parser = ["joint", "pretrain"], default_value = "joint")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit CSV summaries and SVG histograms.
    Report {
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        hardness: PathBuf,
        #[arg(long = "filter-report")]
        filter_report: Option<PathBuf>,
        /// Take per-rank counts from this manifest instead of recomputing
        /// them with the default cap.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("FREEMASK_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn read_real_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no real sample ids listed",
            path.display()
        )));
    }
    Ok(ids)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            out,
            scenes,
            width,
            height,
            classes,
            noise_fraction,
            noise_multiplier,
            seed,
        } => {
            let mut spec = SceneSpec::uniform(width, height, classes, seed);
            spec.noise_fraction = noise_fraction;
            spec.noise_multiplier = noise_multiplier;
            generate_dataset(&spec, scenes, &out)
        }
        Command::Stats {
            root,
            out,
            provenance,
            deterministic: _,
            config,
        } => {
            let config = config.resolve()?;
            let index = scan_dataset(&root, &config)?;
            let table = compute_stats(&index, &config, &provenance)?;
            table.to_json_path(&out)
        }
        Command::Loss { root, out, config } => {
            let config = config.resolve()?;
            let index = scan_dataset(&root, &config)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for record in index.records() {
                let run = || -> Result<()> {
                    let prob_path = record.prob_path.as_ref().ok_or_else(|| Error::MissingPair {
                        stem: record.sample_id.clone(),
                    })?;
                    let labels = codec::read_label_map(&record.label_path, &config)?;
                    let probs = codec::read_prob_map(
                        prob_path,
                        (labels.width(), labels.height()),
                        config.num_classes,
                    )?;
                    let losses =
                        compute_loss_map(&probs, &labels, DEFAULT_EPSILON, config.ignore_value)?;
                    codec::write_loss_map(&losses, &out.join(format!("{}.npy", record.sample_id)))
                };
                run().map_err(|e| e.with_sample(&record.sample_id))?;
            }
            Ok(())
        }
        Command::Filter {
            root,
            stats,
            out,
            config,
        } => {
            let stats_table = ClassStatsTable::from_json_path(&stats)?;
            let mut config_args = config;
            if config_args.classes.is_none() {
                config_args.classes = Some(stats_table.num_classes);
            }
            let config = config_args.resolve()?;
            if config.num_classes != stats_table.num_classes {
                return Err(Error::Config(format!(
                    "--classes {} disagrees with stats table ({} classes)",
                    config.num_classes, stats_table.num_classes
                )));
            }
            let index = scan_dataset(&root, &config)?;
            let report = filter_dataset(&index, &stats_table, config.alpha, &out, &config)?;
            report.to_json_path(&out.join("report.json"))
        }
        Command::Hardness {
            root,
            stats,
            out,
            mean_mode,
            config,
        } => {
            let stats_table = ClassStatsTable::from_json_path(&stats)?;
            let mut config_args = config;
            if config_args.classes.is_none() {
                config_args.classes = Some(stats_table.num_classes);
            }
            let config = config_args.resolve()?;
            let index = scan_dataset(&root, &config)?;
            let mut records = Vec::with_capacity(index.len());
            for record in index.records() {
                let labels = codec::read_label_map(&record.label_path, &config)
                    .map_err(|e| e.with_sample(&record.sample_id))?;
                records.push(mask_hardness(
                    &record.sample_id,
                    &labels,
                    &stats_table,
                    config.ignore_value,
                    mean_mode,
                )?);
            }
            let ranked = rank_masks(records)?;
            write_hardness_csv(&ranked, None, &out)
        }
        Command::Manifest {
            hardness,
            out,
            config,
        } => {
            let mut config_args = config;
            if config_args.classes.is_none() {
                config_args.classes = Some(1); // manifest building never touches labels
            }
            let config = config_args.resolve()?;
            let ranked = read_hardness_csv(&hardness)?;
            let manifest = assemble::build_manifest(&ranked, &config)?;
            manifest.to_json_path(&out)
        }
        Command::Plan {
            manifest,
            real_ids,
            mode,
            out,
            seed,
        } => {
            let manifest = SamplingManifest::from_json_path(&manifest)?;
            let reals = read_real_ids(&real_ids)?;
            let plan = match mode.as_str() {
                "joint" => assemble::joint_training_plan(&reals, &manifest, seed)?,
                "pretrain" => assemble::pretrain_plan(&reals, &manifest)?,
                other => return Err(Error::Config(format!("unknown plan mode '{other}'"))),
            };
            assemble::write_plan_path(&plan, &out)
        }
        Command::Report {
            stats,
            hardness,
            filter_report,
            manifest,
            out,
        } => {
            let stats_table = ClassStatsTable::from_json_path(&stats)?;
            let ranked = read_hardness_csv(&hardness)?;
            let filter = filter_report
                .map(|p| FilterReport::from_json_path(&p))
                .transpose()?;
            match manifest {
                Some(path) => {
                    let manifest = SamplingManifest::from_json_path(&path)?;
                    let counts: Vec<u32> = manifest.entries.iter().map(|e| e.count).collect();
                    report_with_counts(&stats_table, &ranked, &counts, filter.as_ref(), &out)
                }
                None => report(&stats_table, &ranked, filter.as_ref(), &out),
            }
        }
    }
}

/// Parses and runs one invocation, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_thread_pool();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}
