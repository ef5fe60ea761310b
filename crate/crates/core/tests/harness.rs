use std::fs;

use coprime_music::harness::{run_fig3, run_sweep, ExperimentConfig, Scenario};
use coprime_music::signal::Snr;

fn noiseless(scenario: Scenario) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_scenario(scenario);
    cfg.signal.snr_db = Snr::Noiseless;
    cfg
}

fn full_set_only(mut cfg: ExperimentConfig, subset: &[u32], trials: usize) -> ExperimentConfig {
    cfg.channel_subsets = vec![subset.to_vec()];
    cfg.trials = trials;
    cfg
}

#[test]
fn fig3_pattern_at_default_seed() {
    for scenario in Scenario::ALL {
        let run = run_fig3(&ExperimentConfig::for_scenario(scenario)).unwrap();
        assert!(
            run.pattern_mismatches(scenario).is_empty(),
            "{:?}",
            run.pattern_mismatches(scenario)
        );
    }
}

#[test]
fn fig3_noiseless_full_set_at_default_seed() {
    for scenario in Scenario::ALL {
        let run = run_fig3(&noiseless(scenario)).unwrap();
        let full = run.results.iter().find(|r| r.subset == [3, 4, 5]).unwrap();
        assert!(
            full.success,
            "scenario {}: {:?}",
            scenario.name(),
            full.estimated
        );
    }
}

#[test]
fn fig3_three_channel_peaks_scenario_c() {
    let run = run_fig3(&ExperimentConfig::for_scenario(Scenario::C)).unwrap();
    let full = run.results.iter().find(|r| r.subset == [3, 4, 5]).unwrap();
    assert_eq!(full.estimated, vec![5.0, 10.0, 26.0]);
}

#[test]
fn sweep_scenario_c_full_set_at_10db() {
    let rows = run_sweep(&full_set_only(
        ExperimentConfig::for_scenario(Scenario::C),
        &[3, 4, 5],
        100,
    ))
    .unwrap();
    assert!(rows[0].rate >= 0.9, "{rows:?}");
}

#[test]
fn sweep_noiseless_full_set_always_succeeds() {
    for scenario in Scenario::ALL {
        let rows = run_sweep(&full_set_only(noiseless(scenario), &[3, 4, 5], 100)).unwrap();
        assert_eq!(rows[0].rate, 1.0, "scenario {}: {rows:?}", scenario.name());
    }
}

#[test]
fn sweep_noiseless_pair_3_4_always_fails_scenario_c() {
    let rows = run_sweep(&full_set_only(noiseless(Scenario::C), &[3, 4], 100)).unwrap();
    assert_eq!(rows[0].rate, 0.0, "{rows:?}");
}

#[test]
fn sweep_rows_are_order_independent_and_labelled() {
    let mut cfg = ExperimentConfig::for_scenario(Scenario::B);
    cfg.trials = 12;
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    let labels: Vec<&str> = a.iter().map(|r| r.subset.as_str()).collect();
    assert_eq!(labels, ["3-4", "3-5", "4-5", "3-4-5"]);
    assert!(a.iter().all(|r| r.trials == 12 && r.successes <= 12));
}

#[test]
fn fig3_outputs_are_reproducible() {
    let cfg = ExperimentConfig::for_scenario(Scenario::B);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_fig3(&cfg).unwrap().write(&cfg, d1.path()).unwrap();
    run_fig3(&cfg).unwrap().write(&cfg, d2.path()).unwrap();

    let mut names: Vec<String> = fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "config.json",
            "pseudospectrum_3-4-5.csv",
            "pseudospectrum_3-4.csv",
            "pseudospectrum_3-5.csv",
            "pseudospectrum_4-5.csv",
            "results.json"
        ]
    );
    for name in &names {
        assert_eq!(
            fs::read(d1.path().join(name)).unwrap(),
            fs::read(d2.path().join(name)).unwrap(),
            "{name}"
        );
    }

    let csv = fs::read_to_string(d1.path().join("pseudospectrum_3-4-5.csv")).unwrap();
    assert!(csv.starts_with("freq_hz,value\n0,"));
    assert_eq!(csv.lines().count(), 61);

    let saved = ExperimentConfig::load(&d1.path().join("config.json")).unwrap();
    assert_eq!(saved, cfg);
    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d1.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(
        results["results"][3]["pseudospectrum_path"],
        "pseudospectrum_3-4-5.csv"
    );
    assert_eq!(results["results"][3]["success"], true);
}

#[test]
fn explicit_phases_are_respected() {
    let mut cfg = ExperimentConfig::for_scenario(Scenario::A);
    cfg.signal.phases = Some(vec![0.0, 1.0, 2.0]);
    let spec = cfg.signal_spec(123).unwrap();
    assert_eq!(spec.amps()[1].phase, 1.0);
    assert_eq!(spec.amps()[2].magnitude, 0.8);
}
