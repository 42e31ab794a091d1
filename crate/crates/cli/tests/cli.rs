use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tpms_core::campaign::{CampaignConfig, CampaignState};
use tpms_core::curve_lab::{replicate_file_name, write_curve_csv, StressStrainCurve};
use tpms_core::lattice_geometry::LatticeSpec;
use tpms_core::tpms_field::{Primitive, WeightVector};

fn tpms(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpms"))
        .args(args)
        .env("TPMS_STATE_DIR", dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn loop_curve(scale: f64) -> StressStrainCurve<f64> {
    let n = 41;
    let load: Vec<(f64, f64)> = (0..n)
        .map(|i| 0.5 * i as f64 / (n - 1) as f64)
        .map(|e| (e, scale * e))
        .collect();
    let unload: Vec<(f64, f64)> = (1..n)
        .map(|i| 0.5 * (1.0 - i as f64 / (n - 1) as f64))
        .map(|e| (e, scale * e * (2.0 * e).powi(3)))
        .collect();
    StressStrainCurve::from_branches(&load, &unload).unwrap()
}

fn proposal_ids(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect()
}

fn write_results(dir: &Path, ids: &[String]) -> Vec<PathBuf> {
    let results = dir.join("results");
    fs::create_dir_all(&results).unwrap();
    let mut files = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for k in 1..=2 {
            let path = results.join(replicate_file_name(id, k));
            write_curve_csv(&loop_curve(2.0 + i as f64 + 0.01 * k as f64), &path).unwrap();
            files.push(path);
        }
    }
    files
}

#[test]
fn init_ingest_propose_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--fast", "--pool-size", "3000", "--batch-size", "6"];

    let out = ok(&tpms(d, &[&["init", "--seed", "5"][..], &common].concat()));
    assert!(out.contains("6 designs in batch 1"), "{out}");
    assert!(d.join("campaign.json").exists());
    let first = d.join("proposals/batch-01.csv");
    let ids = proposal_ids(&first);
    assert_eq!(ids.len(), 6);
    assert_eq!(ids[0], "b01-d001");

    let again = tpms(d, &["init"]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));

    let early = tpms(d, &[&["propose"][..], &common].concat());
    assert!(!early.status.success());

    let files = write_results(d, &ids);
    let mut args = vec!["ingest".to_string()];
    args.extend(files.iter().map(|p| p.display().to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = ok(&tpms(d, &args));
    assert!(out.contains("stored 6 designs"), "{out}");
    let out = ok(&tpms(d, &args));
    assert!(out.contains("stored 0 designs, 6 unchanged"), "{out}");

    let out = ok(&tpms(
        d,
        &[&["propose", "--kappa-override", "0.5"][..], &common].concat(),
    ));
    assert!(out.contains("batch 2: 6 designs"), "{out}");
    assert!(out.contains("κ = 0.5"), "{out}");
    let second = proposal_ids(&d.join("proposals/batch-02.csv"));
    assert_eq!(second.len(), 6);
    assert!(second.iter().all(|id| id.starts_with("b02-")));
    assert!(d.join("models/ensemble-b02.bin").exists());
    let state = CampaignState::load(&d.join("campaign.json")).unwrap();
    assert_eq!(state.batches.len(), 2);
    assert_eq!(state.checkpoint.as_deref(), Some("models/ensemble-b02.bin"));

    let out = ok(&tpms(d, &["report"]));
    assert!(out.contains("Energy dissipation"), "{out}");
    for f in ["summary.csv", "pca.csv", "curves.csv", "report.txt"] {
        assert!(d.join("report").join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(d.join("report/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("1,6,"), "{summary}");
}

#[test]
fn explicit_state_path_overrides_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let elsewhere = dir.path().join("other");
    fs::create_dir_all(&elsewhere).unwrap();
    let state = elsewhere.join("mine.json");
    let s = state.display().to_string();
    ok(&tpms(
        dir.path(),
        &["init", "--fast", "--batch-size", "3", "--state", &s],
    ));
    assert!(state.exists());
    assert!(elsewhere.join("proposals/batch-01.csv").exists());
    assert!(!dir.path().join("campaign.json").exists());
}

#[test]
fn export_meshes_writes_stl_per_design() {
    let dir = tempfile::tempdir().unwrap();
    let config = CampaignConfig {
        export_lattice: LatticeSpec::default().with_tiling([1, 1, 1]).with_resolution(12),
        ..CampaignConfig::fast()
    };
    let mut state = CampaignState::new(config, 0).unwrap();
    state.push_batch(
        None,
        None,
        vec![
            (WeightVector::unit(Primitive::Gyroid), None),
            (
                WeightVector::pair(Primitive::Diamond, Primitive::SchwarzP, 0.5).unwrap(),
                None,
            ),
        ],
    );
    state.save(&dir.path().join("campaign.json")).unwrap();
    let out = ok(&tpms(dir.path(), &["export-meshes", "1"]));
    let meshes = dir.path().join("meshes/batch-01");
    let written: Vec<_> = fs::read_dir(&meshes).unwrap().collect();
    assert!(!written.is_empty(), "{out}");
    assert!(meshes.join("b01-d001.stl").exists());
    assert!(out.contains("STL files written"), "{out}");

    let missing = tpms(dir.path(), &["export-meshes", "9"]);
    assert!(!missing.status.success());
}

#[test]
fn virtual_run_produces_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&tpms(
        dir.path(),
        &[
            "virtual-run",
            "--fast",
            "--batches",
            "2",
            "--pool-size",
            "2000",
            "--batch-size",
            "5",
            "--seed",
            "3",
        ],
    ));
    assert!(out.contains("virtual campaign (seed 3)"), "{out}");
    assert!(out.contains("last/first batch mean"), "{out}");
    let state = CampaignState::load(&dir.path().join("campaign.json")).unwrap();
    assert_eq!(state.batches.len(), 2);
    assert_eq!(state.batches[1].measured.len(), 5);
    assert_eq!(state.external.len(), 8);
    assert!(dir.path().join("report/summary.csv").exists());
}

#[test]
fn missing_state_and_bad_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = tpms(dir.path(), &["report"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    ok(&tpms(dir.path(), &["init", "--fast", "--batch-size", "2"]));
    let stray = dir.path().join("not-a-replicate.csv");
    write_curve_csv(&loop_curve(1.0), &stray).unwrap();
    let out = tpms(dir.path(), &["ingest", &stray.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let unknown = dir.path().join(replicate_file_name("b07-d001", 1));
    write_curve_csv(&loop_curve(1.0), &unknown).unwrap();
    let out = tpms(dir.path(), &["ingest", &unknown.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
}
