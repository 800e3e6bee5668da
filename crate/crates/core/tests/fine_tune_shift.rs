//! Transfer to a denser, more Doppler-spread target population.

use kanrd::eval::{accuracy_table, featurize, generate_segments, DatasetSpec};
use kanrd::kan::{fine_tune, train, KanModel, TrainOptions};
use kanrd::sim::TargetModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shifted_spec() -> DatasetSpec {
    let mut spec = DatasetSpec {
        snr_db: (25.0, 35.0),
        ..DatasetSpec::default()
    };
    spec.scenario.target_model = TargetModel {
        scatterers: (100, 200),
        extent_m: (2.5, 3.0),
        doppler_spread_mps: (0.6, 0.9),
        rcs_override: None,
    };
    spec
}

#[test]
fn fine_tuning_recovers_shifted_accuracy() {
    let m = 10;
    let base = generate_segments(&DatasetSpec::default(), 2500, 1).unwrap();
    let (tr, te) = base.split_at(4000);
    let train_set = featurize(tr, m).unwrap();
    let test_in = featurize(te, m).unwrap();
    let opts = TrainOptions::default();
    let pre = train(&KanModel::detector(m, 0).unwrap(), &train_set, None, &opts).unwrap();
    let acc_in = pre.model.accuracy(&test_in);

    let shifted = featurize(&generate_segments(&shifted_spec(), 800, 2).unwrap(), m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (pool, test_shift) = shifted.split(0.25, &mut rng);
    let few = pool.balanced_sample(100, &mut rng).unwrap();
    let acc_pre = pre.model.accuracy(&test_shift);
    assert!(acc_in - acc_pre >= 0.05, "in {acc_in} shifted {acc_pre}");

    let plain = fine_tune(&pre.model, &train_set, &few, 1.0, None, &opts).unwrap();
    let boosted = fine_tune(&pre.model, &train_set, &few, 10.0, None, &opts).unwrap();
    assert!(plain.report.final_loss.is_finite() && boosted.report.final_loss.is_finite());
    let acc_plain = plain.model.accuracy(&test_shift);
    let acc_boost = boosted.model.accuracy(&test_shift);
    eprintln!("in {acc_in:.4} pre {acc_pre:.4} plain {acc_plain:.4} boosted {acc_boost:.4}");
    assert!(acc_boost > acc_pre);
    assert!(acc_in - acc_boost <= 0.02, "in {acc_in} post {acc_boost}");
    assert!(acc_boost >= acc_plain, "boosted {acc_boost} plain {acc_plain}");

    let before = accuracy_table(&pre.model, &[("in-distribution", &test_in), ("shifted", &test_shift)]).unwrap();
    let after = accuracy_table(&boosted.model, &[("shifted/fine-tuned", &test_shift)]).unwrap();
    assert!(before[1].accuracy_pct < before[0].accuracy_pct);
    assert!(after[0].accuracy_pct > before[1].accuracy_pct);
    assert_eq!(before[1].n_h0 + before[1].n_h1, test_shift.len());
}

#[test]
fn same_distribution_few_shot_changes_little() {
    let m = 5;
    let base = generate_segments(&DatasetSpec::default(), 1500, 7).unwrap();
    let (tr, rest) = base.split_at(2000);
    let (few_raw, te) = rest.split_at(14);
    let train_set = featurize(tr, m).unwrap();
    let few = featurize(few_raw, m).unwrap();
    let test = featurize(te, m).unwrap();
    let opts = TrainOptions::default();
    let pre = train(&KanModel::detector(m, 0).unwrap(), &train_set, None, &opts).unwrap();
    let post = fine_tune(&pre.model, &train_set, &few, 10.0, None, &opts).unwrap();
    let (a, b) = (pre.model.accuracy(&test), post.model.accuracy(&test));
    assert!((a - b).abs() <= 0.01, "{a} vs {b}");
}
