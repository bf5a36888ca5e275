mod common;

use selftrip_cli::pipeline::{Stage, TrainerKind, Workspace, MODEL, REPORT};
use selftrip_core::corpus::Query;
use selftrip_core::selftrain;

#[test]
fn staged_run_matches_library_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::fixture(dir.path());
    let ws = Workspace::open(config.clone()).unwrap();
    let staged = ws.run_all().unwrap();
    let direct = selftrain::train(&ws.corpus().unwrap(), &config.train).unwrap().model;
    assert_eq!(staged.to_json(), direct.to_json());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for sub in ["a", "b"] {
        let d = dir.path().join(sub);
        std::fs::create_dir_all(&d).unwrap();
        let mut config = common::fixture(&d);
        config.train.loocv = selftrip_core::config::LoocvMode::Kfold(4);
        let ws = Workspace::open(config).unwrap();
        ws.run_all().unwrap();
        ws.evaluate(TrainerKind::Selftrip, 2).unwrap();
        runs.push((std::fs::read(ws.path(MODEL)).unwrap(), std::fs::read(ws.path(REPORT)).unwrap()));
    }
    assert!(runs[0] == runs[1]);
}

#[test]
fn missing_stage_names_the_command_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(common::fixture(dir.path())).unwrap();
    ws.ingest().unwrap();
    let err = ws.walk().unwrap_err().to_string();
    assert!(err.contains("selftrip build-graph"), "{err}");
    let err = ws.train().unwrap_err().to_string();
    assert!(err.contains("selftrip"), "{err}");
}

#[test]
fn changed_config_invalidates_downstream_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::fixture(dir.path());
    let ws = Workspace::open(config.clone()).unwrap();
    ws.run_all().unwrap();
    let mut changed = config;
    changed.train.seed += 1;
    let ws = Workspace::open(changed).unwrap();
    let err = ws.model().unwrap_err().to_string();
    assert!(err.contains("different config"), "{err}");
    assert!(ws.require(Stage::Ingest).is_ok());
}

#[test]
fn oracle_evaluation_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(common::fixture(dir.path())).unwrap();
    ws.ingest().unwrap();
    let r = ws.evaluate(TrainerKind::Oracle, 1).unwrap();
    assert_eq!(r.mean_f1, 1.0);
    assert_eq!(r.mean_pairs_f1, 1.0);
    assert_eq!(r.scored, common::corpus().trips.len());
}

#[test]
fn two_poi_recommendation_is_the_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(common::fixture(dir.path())).unwrap();
    ws.run_all().unwrap();
    let q = Query { start_poi: "p00".into(), start_hour: 9, end_poi: "p05".into(), end_hour: 12, n: 2 };
    assert_eq!(ws.recommend(&q).unwrap(), vec!["p00", "p05"]);
}
