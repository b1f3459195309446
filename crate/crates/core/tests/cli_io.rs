mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::*;
use epdc::cli::main_with_args;
use epdc::error::EpdcError;
use epdc::io::dataset::{ingest_str, serialize_dataset, IngestOptions};
use epdc::io::optics::{mean_photons_to_power, power_to_mean_photons, OpticalConfig};
use epdc::io::report::{read_series, ReportBody};
use epdc::io::{BiasScenario, Report, RunConfig, ScenarioFile};
use epdc::{click_probability, BiasCurrent, SyntheticScenario};
use proptest::prelude::*;

fn src() -> &'static Path {
    Path::new("input.csv")
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("epdc").chain(args.iter().copied()))
}

fn scenario_file(dir: &Path, currents: &[f64]) -> PathBuf {
    let scenarios = currents
        .iter()
        .enumerate()
        .map(|(k, &b)| BiasScenario {
            bias_current_ua: b,
            scenario: SyntheticScenario { probe_grid: power_grid(), ..SyntheticScenario::log_spaced(designed_truth(b), 1.0, 2.0, 0, TRIALS, k as u64) },
        })
        .collect();
    let path = dir.join("scenario.json");
    fs::write(&path, ScenarioFile::new(scenarios).to_json()).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn example_row_ingests() {
    let text = "bias_current_uA,power_W,clicks,trials\n17.0,2.0e-9,1250,2.0e7\n";
    let data = ingest_str(text, src(), &IngestOptions::default()).unwrap();
    let d = &data[&BiasCurrent(17.0)][0];
    assert!((d.rate() - 6.25e-5).abs() < 1e-18);
    assert!(rel(d.mean_photons(), power_to_mean_photons(2e-9, &OpticalConfig::default()).unwrap()) < 1e-15);
}

#[test]
fn ingest_errors() {
    let o = IngestOptions::default();
    assert!(matches!(ingest_str("", src(), &o), Err(EpdcError::Arity(_))));
    assert!(matches!(ingest_str("bias_current_uA,power,clicks,trials\n17,1e-9,1,10\n", src(), &o), Err(EpdcError::Unit(_))));
    assert!(matches!(ingest_str("bias_current_uA,power_W,clicks\n17,1e-9,1\n", src(), &o), Err(EpdcError::Unit(_))));
    let bad = "bias_current_uA,power_W,clicks,trials\n17,1e-9,1,10\n17,2e-9,20,10\n";
    match ingest_str(bad, src(), &o) {
        Err(EpdcError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_rows_merge() {
    let text = "bias_current_uA,mean_photons,clicks,trials\n17,10.0,3,100\n17,10.0,5,100\n";
    let data = ingest_str(text, src(), &IngestOptions::default()).unwrap();
    let d = &data[&BiasCurrent(17.0)];
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].clicks(), d[0].trials()), (8, 200));
}

#[test]
fn synthetic_dataset_round_trips() {
    let file = ScenarioFile::new(
        [14.0, 17.0, 20.0]
            .iter()
            .map(|&b| BiasScenario {
                bias_current_ua: b,
                scenario: SyntheticScenario::log_spaced(designed_truth(b), 7.55, 1.9e6, 25, TRIALS, b as u64),
            })
            .collect(),
    );
    let data = file.synthesize().unwrap();
    let back = ingest_str(&serialize_dataset(&data), src(), &IngestOptions::default()).unwrap();
    assert_eq!(back, data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_is_lossless(points in prop::collection::vec((1e-3f64..1e7, 0u64..1000, 1000u64..10_000_000), 1..20), bias in 1.0f64..40.0) {
        let stats: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(k, &(n, c, t))| epdc::ClickStatistics::new(n * (1.0 + k as f64), c.min(t), t, Default::default()).unwrap())
            .collect();
        let data: epdc::sweep_analysis::SweepData = [(BiasCurrent(bias), stats)].into_iter().collect();
        let back = ingest_str(&serialize_dataset(&data), src(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn power_conversion_inverts(power in 0.0f64..1e-3, wl in 4e-7f64..2e-6, rate in 1e3f64..1e9, att in 0.0f64..60.0) {
        let cfg = OpticalConfig { wavelength_m: wl, repetition_rate_hz: rate, attenuation_db: att };
        let n = power_to_mean_photons(power, &cfg).unwrap();
        let back = mean_photons_to_power(n, &cfg).unwrap();
        prop_assert!((back - power).abs() <= 1e-14 * power);
    }
}

#[test]
fn five_microwatts_is_about_1_9e6_photons() {
    let n = power_to_mean_photons(5e-6, &OpticalConfig::default()).unwrap();
    assert!((1.8e6..=2.0e6).contains(&n), "{n}");
}

#[test]
fn unit_conversion_errors() {
    let cfg = OpticalConfig::default();
    assert!(matches!(power_to_mean_photons(-1.0, &cfg), Err(EpdcError::Domain(_))));
    let bad = OpticalConfig { wavelength_m: 0.0, ..cfg };
    assert!(power_to_mean_photons(1e-9, &bad).is_err());
}

#[test]
fn config_toml() {
    let cfg = RunConfig::from_toml("seed = 7\n[fit]\nmulti_starts = 3\n[selection]\ni_max_max = 4\n").unwrap();
    assert_eq!(cfg.fit.seed, 7);
    assert_eq!(cfg.fit.multi_starts, 3);
    assert_eq!(cfg.selection.i_max_max, 4);
    assert!(matches!(RunConfig::from_toml("[fit]\nunknown = 1\n"), Err(EpdcError::Config(_))));
}

#[test]
fn select_report_is_faithful() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenario_file(dir.path(), &[17.0]);
    let csv = dir.path().join("data.csv");
    let out = dir.path().join("report.json");
    assert_eq!(run(&["synth", path_str(&scenario), "-o", path_str(&csv)]), 0);
    assert_eq!(run(&["select", path_str(&csv), "-o", path_str(&out)]), 0);

    let report = Report::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    let ReportBody::Selection { summary, ladder, selection, bias_current_ua } = &report.result else { panic!("not a selection report") };
    assert_eq!(*bias_current_ua, Some(17.0));
    let summary = summary.as_ref().unwrap();
    assert_eq!(summary.i_max, 2);
    let cfg = report.settings.selection.as_ref().unwrap();
    assert_eq!(ladder.len(), cfg.i_max_max - cfg.i_max_min + 1);
    assert_eq!(selection.candidates.len(), ladder.len());
    let fit = selection.selected().unwrap();
    assert_eq!(summary.model, fit.model);
    assert_eq!(summary.parameters.len(), fit.model.p().len() + 1);
    assert!(dir.path().join("report.meta.json").exists());

    // Curves re-evaluate from the reported parameters.
    let curve = read_series(&fs::read_to_string(dir.path().join("report.I17uA.curve.tsv")).unwrap());
    assert!(!curve.is_empty());
    for row in &curve {
        let r = click_probability(&summary.model, row[0]).unwrap();
        assert!(rel(row[1], r) <= 1e-12, "{row:?} vs {r}");
    }
    let points = read_series(&fs::read_to_string(dir.path().join("report.I17uA.points.tsv")).unwrap());
    assert_eq!(points.len(), 25);
}

#[test]
fn runs_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenario_file(dir.path(), &[14.0, 17.0, 20.0]);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "1", "4"].iter().enumerate() {
        let csv = dir.path().join(format!("data{k}.csv"));
        let out = dir.path().join(format!("sweep{k}.json"));
        assert_eq!(run(&["--threads", threads, "--seed", "11", "synth", path_str(&scenario), "-o", path_str(&csv)]), 0);
        assert_eq!(run(&["--threads", threads, "--seed", "11", "sweep", path_str(&csv), "-o", path_str(&out)]), 0);
        outputs.push((fs::read(&csv).unwrap(), fs::read(&out).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenario_file(dir.path(), &[17.0, 20.0]);
    let csv = dir.path().join("data.csv");
    let out = dir.path().join("out.json");
    assert_eq!(run(&["synth", path_str(&scenario), "-o", path_str(&csv)]), 0);
    // Parse and validation errors.
    assert_eq!(run(&["fit", path_str(&csv)]), 2);
    assert_eq!(run(&["select", path_str(&csv), "-o", path_str(&out)]), 2);
    assert_eq!(run(&["--bogus"]), 2);
    // Non-convergence.
    let cfg = dir.path().join("tight.toml");
    fs::write(&cfg, "[fit]\nmax_iterations = 1\n").unwrap();
    let tight = ["--config", path_str(&cfg)];
    assert_eq!(run(&[&tight[..], &["fit", path_str(&csv), "--bias", "17", "--i-max", "2", "-o", path_str(&out)]].concat()), 3);
    // No candidate accepted: the report is still written.
    assert_eq!(run(&[&tight[..], &["select", path_str(&csv), "--bias", "17", "-o", path_str(&out)]].concat()), 4);
    let report = Report::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(matches!(report.result, ReportBody::Selection { summary: None, .. }));
    // Success.
    assert_eq!(run(&["fit", path_str(&csv), "--bias", "20", "--i-max", "2", "-o", path_str(&out)]), 0);
    assert_eq!(run(&["--version"]), 0);
}

#[test]
fn convert_verb() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.txt");
    assert_eq!(run(&["convert", "--power", "5e-6", "-o", path_str(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let n: f64 = text.trim().strip_prefix("mean_photons ").unwrap().parse().unwrap();
    assert!((1.8e6..=2.0e6).contains(&n));
    assert_eq!(run(&["convert", "--mean-photons", &format!("{n:?}"), "-o", path_str(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let p: f64 = text.trim().strip_prefix("power_W ").unwrap().parse().unwrap();
    assert!(rel(p, 5e-6) < 1e-15);
    assert_eq!(run(&["convert", "--power=-1", "-o", path_str(&out)]), 2);
}
