use std::fs;
use std::path::{Path, PathBuf};

use qfso::harness::{
    calibrate_eta0, files, regenerate_report, run_scenario, simulate, ArtifactSet, HarnessError,
    RunReport, ScenarioConfig,
};

fn fast() -> ScenarioConfig {
    ScenarioConfig::builtin("fast-ci").unwrap()
}

fn run_into(cfg: &ScenarioConfig, dir: &Path) -> RunReport {
    let (report, out) = run_scenario(cfg, Some(dir)).unwrap();
    assert_eq!(out, dir);
    report
}

fn artifact_names() -> [&'static str; 8] {
    [
        files::CONFIG,
        files::TRACE_CORRECTED,
        files::TRACE_UNCORRECTED,
        files::COARSE_EVENTS,
        files::SIGNAL,
        files::IDLER,
        files::RUN_STATS,
        files::HISTOGRAM,
    ]
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = run_into(&fast(), &a);
    let rb = run_into(&fast(), &b);
    for name in artifact_names() {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(ra.without_timing(), rb.without_timing());
    assert_eq!(ra.without_timing().to_json(), rb.without_timing().to_json());
}

#[test]
fn distinct_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let mut other = fast();
    other.seed += 1;
    run_into(&fast(), &tmp.path().join("a"));
    run_into(&other, &tmp.path().join("b"));
    for name in [files::TRACE_CORRECTED, files::SIGNAL, files::IDLER] {
        assert_ne!(
            fs::read(tmp.path().join("a").join(name)).unwrap(),
            fs::read(tmp.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn report_regenerates_exactly_from_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_into(&fast(), tmp.path());
    let stored: RunReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join(files::REPORT)).unwrap()).unwrap();
    assert_eq!(stored, report);
    assert_eq!(regenerate_report(tmp.path()).unwrap(), report);
}

#[test]
fn persisted_artifacts_equal_the_in_memory_run() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(&fast(), tmp.path());
    let loaded = ArtifactSet::load(tmp.path()).unwrap();
    assert_eq!(loaded, simulate(&fast()).unwrap());
}

#[test]
fn config_hash_is_in_every_text_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_into(&fast(), tmp.path());
    let hash = fast().hash();
    assert_eq!(report.config_hash, hash);
    assert_eq!(hash.len(), 64);
    for name in [
        files::TRACE_CORRECTED,
        files::TRACE_UNCORRECTED,
        files::COARSE_EVENTS,
        files::RUN_STATS,
        files::HISTOGRAM,
        files::REPORT,
    ] {
        let text = fs::read_to_string(tmp.path().join(name)).unwrap();
        assert!(text.contains(&hash), "{name}");
    }
    // the stored config hashes back to the same value
    let text = fs::read_to_string(tmp.path().join(files::CONFIG)).unwrap();
    assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap().hash(), hash);
}

#[test]
fn tampered_trace_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(&fast(), tmp.path());
    let path = tmp.path().join(files::TRACE_CORRECTED);
    let text = fs::read_to_string(&path).unwrap();
    let hash = fast().hash();
    fs::write(&path, text.replace(&hash, &"0".repeat(64))).unwrap();
    assert!(regenerate_report(tmp.path()).is_err());
}

#[test]
fn missing_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let err = ScenarioConfig::load(missing.to_str().unwrap()).unwrap_err();
    assert!(matches!(err, HarnessError::ConfigRead { .. }));
    assert!(err.is_validation());
    assert!(ScenarioConfig::load("builtin:nonexistent").unwrap_err().is_validation());
}

#[test]
fn bad_values_are_tagged_with_their_module() {
    let mut cfg = fast();
    cfg.plant.coupling.eta0 = 2.0;
    match cfg.validate().unwrap_err() {
        HarnessError::Invalid { module, .. } => assert_eq!(module, "plant"),
        other => panic!("{other:?}"),
    }
    let mut cfg = fast();
    cfg.correlation.tau_range_ps = 1000;
    assert!(matches!(cfg.validate(), Err(HarnessError::Invalid { module: "correlation", .. })));
    let mut cfg = fast();
    cfg.photonics.duration_s = 10.0;
    assert!(matches!(cfg.validate(), Err(HarnessError::Invalid { module: "photonics", .. })));
    // nothing is written for an invalid config
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(run_scenario(&cfg, Some(&dir)).unwrap_err().is_validation());
    assert!(!dir.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("{}\nbogus = 1\n", fast().to_toml_string());
    assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(HarnessError::Parse(_))));
    let text = fast().to_toml_string().replace("[control.pid]", "[control.pid]\nkq = 1.0");
    assert!(ScenarioConfig::from_toml_str(&text).is_err());
}

#[test]
fn config_roundtrips_and_hash_ignores_output_dir() {
    let cfg = ScenarioConfig::builtin("paper-default").unwrap();
    let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    let mut moved = cfg.clone();
    moved.output_dir = Some(PathBuf::from("/somewhere/else"));
    assert_eq!(moved.hash(), cfg.hash());
    assert_eq!(moved.resolve_output_dir(None), PathBuf::from("/somewhere/else"));
    assert_eq!(moved.resolve_output_dir(Some(Path::new("x"))), PathBuf::from("x"));
    let mut reseeded = cfg.clone();
    reseeded.seed += 1;
    assert_ne!(reseeded.hash(), cfg.hash());
}

#[test]
fn relative_profile_resolves_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("temps.csv"), "t_s,temp_c\n0,12\n3,13\n").unwrap();
    let mut cfg = fast();
    cfg.turbulence.profile = "temps.csv".into();
    let path = tmp.path().join("run.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    let loaded = ScenarioConfig::load(path.to_str().unwrap()).unwrap();
    assert_eq!(Path::new(&loaded.turbulence.profile), tmp.path().join("temps.csv"));
    assert!(loaded.temp_profile().is_ok());
}

#[test]
fn correction_suppresses_wander_tenfold() {
    let set = simulate(&fast()).unwrap();
    let (report, _) = qfso::harness::analyze(&set, 0.0).unwrap();
    assert!(report.beam.suppression_ratio >= 10.0, "{:?}", report.beam);
    assert_eq!(report.beam.suppression_ratio, report.beam.uncorrected_fwhm_um / report.beam.corrected_fwhm_um);
    // the uncorrected trace really is the open loop
    assert!(set.uncorrected.rows.iter().all(|r| r.fsm_cmd == qfso::Vec2::ZERO));
}

#[test]
fn eta0_calibration_picks_the_nearest_grid_point() {
    let cfg = fast();
    let grid = [0.40, 0.44, 0.48];
    let first = calibrate_eta0(&cfg, &grid, 0.0).unwrap();
    // the loop never reads eta0, so mean η scales with it
    let per_unit = first.grid[0].1 / 0.40;
    for &(e, m) in &first.grid {
        assert!((m - per_unit * e).abs() < 1e-12, "{e} {m}");
    }
    assert_eq!(first.eta0, 0.40);
    let target = per_unit * 0.45;
    let cal = calibrate_eta0(&cfg, &grid, target).unwrap();
    assert_eq!(cal.eta0, 0.44);
    assert!(calibrate_eta0(&cfg, &[], 0.19).is_err());
    assert!(calibrate_eta0(&cfg, &[2.0], 0.19).unwrap_err().is_validation());
}
