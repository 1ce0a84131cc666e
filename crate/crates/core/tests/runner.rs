//! End-to-end runs of the experiment runner on a tiny CartPole budget.

use std::fs;

use hqrl::experiment::{
    self, aggregate, plot_runs, preset, read_aggregate_csv, ExperimentConfig, ExperimentError, RunOptions, RunRecord,
    PRESETS,
};
use hqrl::ppo::{read_curve_csv, CurveRow, Scheme};

fn tiny(name: &str, scheme: Scheme) -> ExperimentConfig {
    let mut config = preset("cartpole").unwrap();
    config.name = name.into();
    config.scheme = scheme;
    config.seeds = vec![4, 9];
    config.ppo.max_steps = 1024;
    config.evaluation.episodes = 3;
    config
}

fn options(root: &std::path::Path) -> RunOptions {
    RunOptions {
        root: root.to_path_buf(),
        force: false,
        jobs: 2,
    }
}

fn without_timing(rows: Vec<CurveRow>) -> Vec<CurveRow> {
    rows.into_iter()
        .map(|mut r| {
            r.steps_per_second = 0.0;
            r
        })
        .collect()
}

#[test]
fn run_directory_is_complete_and_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let config = tiny("tiny", Scheme::HybridQuantumActor);
    let record = experiment::run(&config, &options(root.path())).unwrap();
    let dir = config.run_dir(root.path());
    assert_eq!(record.seeds.len(), 2);
    assert_eq!(RunRecord::load(&dir).unwrap(), record);

    // curve length is the iteration budget: 1024 steps / 256 per iteration
    let curves = record.curves(&dir).unwrap();
    assert!(curves.iter().all(|c| c.len() == 4));

    // aggregate mean is the arithmetic mean of the seed CSVs
    let rows = read_aggregate_csv(&dir.join("aggregate.csv")).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let values: Vec<f64> = curves
            .iter()
            .map(|c| c[i].return_mean)
            .filter(|v| v.is_finite())
            .collect();
        if values.is_empty() {
            assert!(row.return_mean.is_nan());
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((row.return_mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert_eq!(row.seeds, values.len());
    }
    assert_eq!(rows, aggregate(&curves));

    // refused without --force, same hash reported
    match experiment::run(&config, &options(root.path())) {
        Err(ExperimentError::Exists { hash, .. }) => assert_eq!(hash, record.config_hash),
        other => panic!("expected a refusal, got {other:?}"),
    }
    assert_eq!(
        experiment::run(&config, &options(root.path())).unwrap_err().exit_code(),
        2
    );

    // the copied config alone reproduces the curves bit for bit
    let copy = ExperimentConfig::load(dir.join("config.toml").to_str().unwrap()).unwrap();
    assert_eq!(copy.hash(), record.config_hash);
    let again = tempfile::tempdir().unwrap();
    let rerun = experiment::run(&copy, &options(again.path())).unwrap();
    let rerun_dir = copy.run_dir(again.path());
    for (a, b) in record.seeds.iter().zip(&rerun.seeds) {
        let read = |d: &std::path::Path, s: &experiment::SeedRecord| {
            without_timing(read_curve_csv(fs::File::open(d.join(&s.curve_file)).unwrap()).unwrap())
        };
        assert_eq!(read(&dir, a), read(&rerun_dir, b));
        assert_eq!(a.final_eval, b.final_eval);
    }
}

#[test]
fn two_schemes_plot_into_one_image() {
    let root = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (name, scheme) in [("hqa", Scheme::HybridQuantumActor), ("base", Scheme::ClassicalBaseline)] {
        let mut config = tiny(name, scheme);
        config.seeds = vec![1];
        experiment::run(&config, &options(root.path())).unwrap();
        dirs.push(config.run_dir(root.path()));
    }
    let out = root.path().join("plots");
    let written = plot_runs(&dirs, &out).unwrap();
    assert_eq!(written, vec![out.join("CartPole-v1.svg")]);
    let svg = fs::read_to_string(&written[0]).unwrap();
    assert!(svg.contains(Scheme::HybridQuantumActor.as_str()));
    assert!(svg.contains(Scheme::ClassicalBaseline.as_str()));
}

#[test]
fn every_preset_survives_a_toml_round_trip() {
    for (name, text) in PRESETS {
        let parsed = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&parsed.to_toml()).unwrap();
        assert_eq!(parsed, again, "{name}");
        assert_eq!(parsed.hash(), again.hash(), "{name}");
    }
}

#[test]
fn output_root_env_var_sets_the_default() {
    // only this test touches the variable
    std::env::set_var(experiment::OUTPUT_ROOT_ENV, "/tmp/hqrl-elsewhere");
    assert_eq!(RunOptions::default().root, std::path::PathBuf::from("/tmp/hqrl-elsewhere"));
    std::env::remove_var(experiment::OUTPUT_ROOT_ENV);
}
