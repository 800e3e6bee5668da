//! Monte-Carlo harness behaviour on the default scenario.

use kanrd::eval::{
    detector_from_id, featurize, generate_segments, kde_export, run_monte_carlo, DatasetSpec, Detector,
    MonteCarloConfig, Scenario,
};
use kanrd::symbolic::builtin;

fn roster(ids: &[&str]) -> Vec<Detector> {
    ids.iter().map(|id| detector_from_id(id).unwrap()).collect()
}

#[test]
fn extremes_of_the_snr_grid() {
    let cfg = MonteCarloConfig {
        snr_grid: vec![-25.0, 25.0],
        trials: 100,
        seed: 4,
        keep_trials: false,
    };
    let rep = run_monte_carlo(&Scenario::default(), &roster(&["paper-eq7-m10", "oscfar@1e-3"]), &cfg).unwrap();
    let kan = &rep.curve("paper-eq7-m10").unwrap().points;
    let cfar = &rep.curve("oscfar@1e-3").unwrap().points;
    assert!(kan[1].pd >= cfar[1].pd, "{} < {}", kan[1].pd, cfar[1].pd);
    assert!(kan[0].pd <= 0.02, "{}", kan[0].pd);
    assert!(cfar[0].pd <= 0.1, "{}", cfar[0].pd);
    for p in kan.iter().chain(cfar) {
        assert_eq!(p.trials, 100);
        assert_eq!(p.total_targets, 100);
    }
    let again = run_monte_carlo(&Scenario::default(), &roster(&["paper-eq7-m10", "oscfar@1e-3"]), &cfg).unwrap();
    assert_eq!(rep.to_json().unwrap(), again.to_json().unwrap());
}

#[test]
fn detection_probability_grows_with_snr() {
    let cfg = MonteCarloConfig {
        snr_grid: vec![-25.0, -15.0, -5.0, 5.0, 15.0, 25.0],
        trials: 100,
        seed: 8,
        keep_trials: false,
    };
    let rep = run_monte_carlo(&Scenario::default(), &roster(&["paper-eq7-m10", "oscfar@1e-4"]), &cfg).unwrap();
    for c in &rep.curves {
        for w in c.points.windows(2) {
            assert!(w[1].pd >= w[0].pd - 0.03, "{}: {:?}", c.detector, c.points.iter().map(|p| p.pd).collect::<Vec<_>>());
        }
    }
}

#[test]
fn kde_statistics_separate_classes() {
    let data = featurize(&generate_segments(&DatasetSpec::default(), 300, 5).unwrap(), 10).unwrap();
    let dump = kde_export(&builtin("paper-eq7-m10").unwrap(), &data).unwrap();
    assert_eq!(dump.len(), 600);
    let mean = |label: usize, pick: fn(&kanrd::eval::KdeSample) -> f64| {
        let v: Vec<f64> = dump.iter().filter(|s| s.label == label).map(pick).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(1, |s| s.h1) > mean(1, |s| s.h0));
    assert!(mean(0, |s| s.h0) > mean(0, |s| s.h1));
}
