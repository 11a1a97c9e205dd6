//! End-to-end CLI tests: full pipeline composition, intermediate-file
//! re-validation, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

use freemask::assemble::SamplingManifest;
use freemask::codec::{read_label_map, read_loss_map, write_label_map, write_npy_f32, write_prob_map};
use freemask::config::CurationConfig;
use freemask::dataset::scan_dataset;
use freemask::filter::FilterReport;
use freemask::hardness::read_hardness_csv;
use freemask::maps::{LabelMap, ProbMap};
use freemask::stats::ClassStatsTable;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_freemask")
}

fn run(args: &[&str]) -> i32 {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn freemask")
        .status
        .code()
        .expect("exit code")
}

fn run_ok(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().expect("spawn freemask");
    assert!(
        out.status.success(),
        "freemask {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_composes_and_revalidates() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    run_ok(&["gen", "--out", s(&data), "--scenes", "64", "--width", "64", "--height", "64", "--classes", "8", "--seed", "17"]);

    let config = CurationConfig::new(8);
    let index = scan_dataset(&data, &config).unwrap();
    assert_eq!(index.len(), 64);

    let stats_path = dir.path().join("stats.json");
    run_ok(&["stats", "--root", s(&data), "--classes", "8", "--out", s(&stats_path)]);
    let stats = ClassStatsTable::from_json_path(&stats_path).unwrap();
    assert_eq!(stats.num_classes, 8);
    assert!(stats.classes.iter().all(|c| c.mean.is_some()));

    let filtered = dir.path().join("filtered");
    run_ok(&["filter", "--root", s(&data), "--stats", s(&stats_path), "--out", s(&filtered)]);
    let report = FilterReport::from_json_path(&filtered.join("report.json")).unwrap();
    assert_eq!(report.alpha, 1.25, "alpha defaults to 1.25 when omitted");
    assert!(report.filtered_fraction > 0.0 && report.filtered_fraction < 0.1);
    for record in index.records() {
        let f = filtered.join(format!("{}.png", record.sample_id));
        read_label_map(&f, &config).unwrap();
    }

    let hardness_path = dir.path().join("hardness.csv");
    run_ok(&["hardness", "--root", s(&data), "--stats", s(&stats_path), "--out", s(&hardness_path)]);
    let ranked = read_hardness_csv(&hardness_path).unwrap();
    assert_eq!(ranked.len(), 64);

    let manifest_path = dir.path().join("manifest.json");
    run_ok(&["manifest", "--hardness", s(&hardness_path), "--classes", "8", "--n-max", "6", "--seed", "17", "--out", s(&manifest_path)]);
    let manifest = SamplingManifest::from_json_path(&manifest_path).unwrap();
    assert_eq!(manifest.entries.len(), 64);
    assert_eq!(manifest.entries[0].count, 6);
    assert_eq!(manifest.entries[63].count, 1);

    let real_ids = dir.path().join("real_ids.txt");
    std::fs::write(&real_ids, "r1\nr2\nr3\nr4\nr5\n").unwrap();
    let plan_path = dir.path().join("plan.jsonl");
    run_ok(&["plan", "--manifest", s(&manifest_path), "--real-ids", s(&real_ids), "--mode", "joint", "--seed", "17", "--out", s(&plan_path)]);
    let plan = freemask::assemble::read_plan_path(&plan_path).unwrap();
    assert_eq!(plan.real_entries.len(), plan.synthetic_entries.len());
    assert_eq!(plan.synthetic_entries.len() as u64, manifest.total_synthetic());

    let report_dir = dir.path().join("report");
    run_ok(&["report", "--stats", s(&stats_path), "--hardness", s(&hardness_path), "--filter-report", s(&filtered.join("report.json")), "--manifest", s(&manifest_path), "--out", s(&report_dir)]);
    for name in ["class_stats.csv", "hardness.csv", "filter_report.csv", "class_means.svg", "mask_hardness.svg"] {
        assert!(report_dir.join(name).exists(), "{name} missing");
    }

    // Pretrain plan variant from the same manifest.
    let pre_path = dir.path().join("pretrain.jsonl");
    run_ok(&["plan", "--manifest", s(&manifest_path), "--real-ids", s(&real_ids), "--mode", "pretrain", "--out", s(&pre_path)]);
    let pre = freemask::assemble::read_plan_path(&pre_path).unwrap();
    assert_eq!(pre.finetune_lr_factor, Some(0.5));
    assert_eq!(pre.real_entries.len(), 5);
}

#[test]
fn loss_subcommand_derives_cross_entropy() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(data.join("masks")).unwrap();
    std::fs::create_dir_all(data.join("probs")).unwrap();

    let config = CurationConfig::new(2);
    let labels = LabelMap::new(2, 1, vec![0, 1], &config).unwrap();
    write_label_map(&labels, &data.join("masks/a.png")).unwrap();
    let probs = ProbMap::new(2, 1, 2, vec![0.5, 0.25, 0.5, 0.75]).unwrap();
    write_prob_map(&probs, &data.join("probs/a.npy")).unwrap();

    let out = dir.path().join("losses");
    run_ok(&["loss", "--root", s(&data), "--classes", "2", "--out", s(&out)]);
    let losses = read_loss_map(&out.join("a.npy"), (2, 1)).unwrap();
    assert!((losses.data()[0] - std::f32::consts::LN_2).abs() < 1e-6);
    assert!((losses.data()[1] - 0.75f32.ln().abs()).abs() < 1e-6);

    // stats over a probs-only dataset goes through the same derivation.
    let stats_path = dir.path().join("stats.json");
    run_ok(&["stats", "--root", s(&data), "--classes", "2", "--out", s(&stats_path)]);
    let table = ClassStatsTable::from_json_path(&stats_path).unwrap();
    assert!((table.mean(0).unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::TempDir::new().unwrap();

    // 2: usage errors.
    assert_eq!(run(&["no-such-subcommand"]), 2);
    assert_eq!(run(&["stats", "--no-such-flag"]), 2);
    assert_eq!(run(&[] as &[&str; 0]), 2);

    // 0: help and a successful run.
    assert_eq!(run(&["--help"]), 0);
    let data = dir.path().join("data");
    run_ok(&["gen", "--out", s(&data), "--scenes", "2", "--width", "8", "--height", "8"]);
    assert_eq!(
        run(&["stats", "--root", s(&data), "--classes", "8", "--out", s(&dir.path().join("st.json"))]),
        0
    );

    // 1: domain failures.
    assert_eq!(
        run(&["stats", "--root", s(&dir.path().join("missing")), "--classes", "8", "--out", s(&dir.path().join("x.json"))]),
        1
    );
    // Mask without a paired loss map.
    let broken = dir.path().join("broken");
    std::fs::create_dir_all(broken.join("masks")).unwrap();
    let config = CurationConfig::new(8);
    let m = LabelMap::new(1, 1, vec![0], &config).unwrap();
    write_label_map(&m, &broken.join("masks/a.png")).unwrap();
    assert_eq!(
        run(&["stats", "--root", s(&broken), "--classes", "8", "--out", s(&dir.path().join("y.json"))]),
        1
    );
    // Invalid config values.
    assert_eq!(
        run(&["stats", "--root", s(&data), "--classes", "0", "--out", s(&dir.path().join("z.json"))]),
        1
    );
    assert_eq!(
        run(&["stats", "--root", s(&data), "--classes", "8", "--alpha", "-1", "--out", s(&dir.path().join("z.json"))]),
        1
    );
}

#[test]
fn sample_errors_carry_sample_context() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(data.join("masks")).unwrap();
    std::fs::create_dir_all(data.join("losses")).unwrap();
    let config = CurationConfig::new(8);
    let m = LabelMap::new(2, 1, vec![0, 1], &config).unwrap();
    write_label_map(&m, &data.join("masks/bad.png")).unwrap();
    // Loss map with the wrong shape.
    write_npy_f32(&data.join("losses/bad.npy"), &[3, 3], &[0.0; 9]).unwrap();

    let out = Command::new(bin())
        .args(["stats", "--root", s(&data), "--classes", "8", "--out", s(&dir.path().join("st.json"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad"), "stderr lacked sample id: {stderr}");
}

#[test]
fn filter_failure_removes_partial_output() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(data.join("masks")).unwrap();
    std::fs::create_dir_all(data.join("losses")).unwrap();
    let config = CurationConfig::new(8);
    for (id, ok) in [("a", true), ("b", false)] {
        let m = LabelMap::new(2, 1, vec![0, 1], &config).unwrap();
        write_label_map(&m, &data.join(format!("masks/{id}.png"))).unwrap();
        if ok {
            write_npy_f32(&data.join(format!("losses/{id}.npy")), &[1, 2], &[0.1, 0.2]).unwrap();
        } else {
            write_npy_f32(&data.join(format!("losses/{id}.npy")), &[9, 9], &[0.0; 81]).unwrap();
        }
    }
    let stats_json = serde_json::json!({
        "version": 1, "provenance": "synthetic", "num_classes": 8,
        "classes": (0..8).map(|j| serde_json::json!({
            "id": j, "count": 1, "loss_sum": 0.5, "mean": 0.5
        })).collect::<Vec<_>>(),
    });
    let stats_path = dir.path().join("stats.json");
    std::fs::write(&stats_path, stats_json.to_string()).unwrap();

    let out_dir: PathBuf = dir.path().join("filtered");
    assert_eq!(
        run(&["filter", "--root", s(&data), "--stats", s(&stats_path), "--out", s(&out_dir)]),
        1
    );
    assert!(!out_dir.join("a.png").exists(), "partial output must be removed");
    assert!(!out_dir.join("b.png").exists());
}

#[test]
fn manifest_is_byte_identical_across_runs() {
    let dir = tempfile::TempDir::new().unwrap();
    let hardness = dir.path().join("h.csv");
    std::fs::write(
        &hardness,
        "mask_id,rank,hardness,valid_pixels,unknown_class_pixels,count\n\
         b,0,5.0,4,0,\n\
         a,1,2.0,4,0,\n\
         c,2,2.0,4,0,\n\
         d,3,1.0,4,0,\n",
    )
    .unwrap();
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    run_ok(&["manifest", "--hardness", s(&hardness), "--classes", "8", "--n-max", "20", "--seed", "7", "--out", s(&m1)]);
    run_ok(&["manifest", "--hardness", s(&hardness), "--classes", "8", "--n-max", "20", "--seed", "7", "--out", s(&m2)]);
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    run_ok(&["gen", "--out", s(&data), "--scenes", "4", "--width", "16", "--height", "16"]);

    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, r#"{"num_classes": 8, "alpha": 1.5}"#).unwrap();
    let stats_path = dir.path().join("stats.json");
    run_ok(&["stats", "--root", s(&data), "--config", s(&config_path), "--out", s(&stats_path)]);

    let filtered = dir.path().join("filtered");
    run_ok(&["filter", "--root", s(&data), "--stats", s(&stats_path), "--config", s(&config_path), "--alpha", "2.0", "--out", s(&filtered)]);
    let report = FilterReport::from_json_path(&filtered.join("report.json")).unwrap();
    assert_eq!(report.alpha, 2.0, "flag must override the config file");

    // Unknown config-file fields are rejected.
    std::fs::write(&config_path, r#"{"num_classes": 8, "bogus": 1}"#).unwrap();
    assert_eq!(
        run(&["stats", "--root", s(&data), "--config", s(&config_path), "--out", s(&stats_path)]),
        1
    );
}

#[test]
fn report_output_is_deterministic() {
    let dir = tempfile::TempDir::new().unwrap();
    let data = dir.path().join("data");
    run_ok(&["gen", "--out", s(&data), "--scenes", "8", "--width", "16", "--height", "16"]);
    let stats_path = dir.path().join("stats.json");
    run_ok(&["stats", "--root", s(&data), "--classes", "8", "--out", s(&stats_path)]);
    let hardness_path = dir.path().join("h.csv");
    run_ok(&["hardness", "--root", s(&data), "--stats", s(&stats_path), "--out", s(&hardness_path)]);

    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    run_ok(&["report", "--stats", s(&stats_path), "--hardness", s(&hardness_path), "--out", s(&r1)]);
    run_ok(&["report", "--stats", s(&stats_path), "--hardness", s(&hardness_path), "--out", s(&r2)]);
    for name in ["class_stats.csv", "hardness.csv", "class_means.svg", "mask_hardness.svg"] {
        assert_eq!(
            std::fs::read(r1.join(name)).unwrap(),
            std::fs::read(r2.join(name)).unwrap(),
            "{name}"
        );
    }
}
