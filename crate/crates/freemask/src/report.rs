//! CSV summaries and SVG histograms of class means and mask hardness.
//!
//! Output is byte-deterministic: fixed bin counts, fixed float formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::filter::FilterReport;
use crate::hardness::{render_hardness_csv, sample_count, RankedMasks};
use crate::stats::ClassStatsTable;

const HISTOGRAM_BINS: usize = 16;

/// Histogram counts over `HISTOGRAM_BINS` equal-width bins spanning
/// [min, max]; a degenerate range puts everything in one bin.
fn histogram(values: &[f64]) -> (f64, f64, Vec<u64>) {
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    if values.is_empty() {
        return (0.0, 0.0, bins);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        bins[0] = values.len() as u64;
        return (min, max, bins);
    }
    let width = (max - min) / HISTOGRAM_BINS as f64;
    for &v in values {
        let mut idx = ((v - min) / width) as usize;
        if idx >= HISTOGRAM_BINS {
            idx = HISTOGRAM_BINS - 1;
        }
        bins[idx] += 1;
    }
    (min, max, bins)
}

fn histogram_svg(values: &[f64], title: &str) -> String {
    let (min, max, bins) = histogram(values);
    let peak = bins.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (width, height, margin) = (640.0, 360.0, 40.0);
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let bar_w = plot_w / HISTOGRAM_BINS as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="14" text-anchor="middle">{title}</text>"#,
        width / 2.0
    );
    for (i, &count) in bins.iter().enumerate() {
        let bar_h = plot_h * count as f64 / peak;
        let x = margin + i as f64 * bar_w;
        let y = margin + (plot_h - bar_h);
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{bar_h:.2}" fill="#4878b0" stroke="black" stroke-width="0.5"/>"##,
            bar_w - 1.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{margin:.1}" y="{:.1}" font-family="monospace" font-size="11">{min:.6}</text>"#,
        height - margin / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{max:.6}</text>"#,
        width - margin,
        height - margin / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Emits class-stat and hardness CSVs plus two SVG histograms into `out_dir`.
/// Counts in the hardness CSV are recomputed from the ranking.
pub fn report(
    stats: &ClassStatsTable,
    hardness_table: &RankedMasks,
    filter_report: Option<&FilterReport>,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, content: &str| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))
    };

    let mut class_csv = String::from("id,count,loss_sum,mean\n");
    for c in &stats.classes {
        let mean = c.mean.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(class_csv, "{},{},{},{}", c.id, c.count, c.loss_sum, mean);
    }
    write("class_stats.csv", &class_csv)?;

    let n = hardness_table.len();
    let counts: Vec<u32> = (0..n)
        .map(|p| sample_count(p, n, crate::config::DEFAULT_N_MAX))
        .collect::<Result<Vec<_>>>()?;
    let mut hardness_csv = Vec::new();
    render_hardness_csv(hardness_table, Some(&counts), &mut hardness_csv)
        .map_err(|e| Error::io(out_dir.join("hardness.csv"), e))?;
    write(
        "hardness.csv",
        std::str::from_utf8(&hardness_csv).expect("csv is UTF-8"),
    )?;

    if let Some(fr) = filter_report {
        let mut filter_csv = String::from("id,total,filtered\n");
        for c in &fr.classes {
            let _ = writeln!(filter_csv, "{},{},{}", c.id, c.total, c.filtered);
        }
        let _ = writeln!(
            filter_csv,
            "# alpha={} filtered_fraction={} undefined_class_pixels={}",
            fr.alpha, fr.filtered_fraction, fr.undefined_class_pixels
        );
        write("filter_report.csv", &filter_csv)?;
    }

    let means: Vec<f64> = stats.classes.iter().filter_map(|c| c.mean).collect();
    write("class_means.svg", &histogram_svg(&means, "class average loss"))?;
    let hardness: Vec<f64> = hardness_table.entries().iter().map(|r| r.hardness).collect();
    write(
        "mask_hardness.svg",
        &histogram_svg(&hardness, "mask hardness"),
    )?;
    Ok(())
}

/// Report variant taking per-rank counts from an existing manifest.
pub fn report_with_counts(
    stats: &ClassStatsTable,
    hardness_table: &RankedMasks,
    counts: &[u32],
    filter_report: Option<&FilterReport>,
    out_dir: &Path,
) -> Result<()> {
    report(stats, hardness_table, filter_report, out_dir)?;
    let mut buf = Vec::new();
    render_hardness_csv(hardness_table, Some(counts), &mut buf)
        .map_err(|e| Error::io(out_dir.join("hardness.csv"), e))?;
    let path = out_dir.join("hardness.csv");
    std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
}
