use std::fs;
use std::path::Path;

use adtomo_core::artifacts::{self, RECORDS};
use adtomo_core::ecosim::{profiles, Advertiser, SharingEdge};
use adtomo_core::pipeline::{self, run_pipeline, PipelineConfig, PipelineError};
use adtomo_core::tomography::{RecordLine, TomographyError};

fn config(sim: adtomo_core::ecosim::SimConfig, seed: u64, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(sim).with_seed(Some(seed));
    c.output_dir = Some(out.to_path_buf());
    c
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn single_planted_edge_is_recovered() {
    for seed in [1, 2, 3] {
        let dir = tempfile::tempdir().unwrap();
        let s = run_pipeline(&config(profiles::single_edge(), seed, dir.path())).unwrap();
        assert_eq!((s.metrics.precision, s.metrics.recall), (1.0, 1.0), "seed {seed}");
        assert_eq!(s.metrics.true_positives, 1);
    }
}

#[test]
fn two_independent_edges_are_recovered() {
    let mut sim = profiles::single_edge();
    let a0 = sim.world.advertisers[0].clone();
    sim.world.advertisers = vec![
        Advertiser { bid_noise_sd: 0.3, ..a0.clone() },
        Advertiser {
            id: "a1".into(),
            bid_noise_sd: 0.3,
            ..a0
        },
    ];
    sim.world.trackers[1].site_coverage = sim.world.trackers[0].site_coverage.clone();
    sim.world.edges.push(SharingEdge {
        tracker: "t1".into(),
        advertiser: "a1".into(),
        reliability: 1.0,
    });
    let dir = tempfile::tempdir().unwrap();
    let s = run_pipeline(&config(sim, 4, dir.path())).unwrap();
    assert_eq!((s.metrics.precision, s.metrics.recall), (1.0, 1.0), "{:?}", s.edges);
}

#[test]
fn validation_points_at_the_field() {
    let out = Path::new("unused");
    let mut c = config(profiles::small(), 0, out);
    c.folds = 3;
    assert_eq!(c.prepare().unwrap_err().path(), "folds");

    let mut c = config(profiles::small(), 0, out);
    c.holdout_runs = 10;
    assert_eq!(c.prepare().unwrap_err().path(), "holdout_runs");

    let mut c = config(profiles::small(), 0, out);
    c.accuracy_threshold = 1.5;
    assert_eq!(c.prepare().unwrap_err().path(), "accuracy_threshold");

    let mut c = config(profiles::small(), 0, out);
    c.sim.world.edges[0].tracker = "nobody".into();
    assert_eq!(c.prepare().unwrap_err().path(), "sim.world.edges[0].tracker");

    // the interest-similarity world has no controls: fine to simulate, not to analyze
    let c = config(profiles::three_groups(), 0, out);
    assert!(c.prepare_world().is_ok());
    assert_eq!(c.prepare().unwrap_err().path(), "sim.run.personas");
}

#[test]
fn config_file_defaults() {
    let sim = serde_json::to_value(profiles::small()).unwrap();
    let c: PipelineConfig = serde_json::from_value(serde_json::json!({ "sim": sim })).unwrap();
    assert_eq!((c.folds, c.holdout_runs, c.accuracy_threshold), (4, 2, 0.6));
    assert_eq!(c.grid.points().len(), 36);
    assert!(serde_json::from_value::<PipelineConfig>(serde_json::json!({ "sim": {}, "fold": 4 })).is_err());
}

#[test]
fn infer_requires_flags() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(profiles::single_edge(), 1, dir.path());
    let p = c.prepare().unwrap();
    pipeline::stage_simulate(&p, dir.path()).unwrap();
    pipeline::stage_flag(&p, dir.path(), dir.path()).unwrap();

    let path = dir.path().join(RECORDS);
    let mut lines: Vec<RecordLine> = artifacts::read_jsonl(&path).unwrap();
    lines.iter_mut().for_each(|l| l.is_different_from_control = None);
    artifacts::write_jsonl(&path, &lines).unwrap();

    let err = pipeline::stage_infer(&p, dir.path(), dir.path()).unwrap_err();
    assert!(matches!(err, PipelineError::Tomography(TomographyError::MissingFlag { .. })));
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("flag stage required"));
}

#[test]
fn stages_compose_to_run() {
    let whole = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    run_pipeline(&config(profiles::single_edge(), 9, whole.path())).unwrap();

    let c = config(profiles::single_edge(), 9, staged.path());
    let p = c.prepare().unwrap();
    let d = staged.path();
    pipeline::stage_simulate(&p, d).unwrap();
    pipeline::stage_flag(&p, d, d).unwrap();
    pipeline::stage_infer(&p, d, d).unwrap();
    pipeline::stage_syncdetect(d, d).unwrap();
    pipeline::stage_h1(d, d).unwrap();
    pipeline::stage_evaluate(d, d).unwrap();

    assert_eq!(listing(whole.path()), listing(staged.path()));
}

#[test]
fn report_embeds_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(profiles::single_edge(), 5, dir.path());
    run_pipeline(&c).unwrap();
    let report: pipeline::InferenceReport = artifacts::read_json(&dir.path().join(artifacts::REPORT_JSON)).unwrap();
    assert_eq!(report.config.seed, Some(5));
    assert_eq!(report.config.sim.run.seed, 5);
    assert_eq!(report.config.output_dir, None);
    assert_eq!(report.config.sim, c.sim);
    assert!(!report.notes.is_empty());
}
