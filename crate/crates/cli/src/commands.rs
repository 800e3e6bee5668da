use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kanrd::eval::{
    accuracy_table, derive_seed, featurize, generate_segments, ground_truth, kde_export, read_segments_csv,
    run_monte_carlo, runtime_compare, sample_scene, write_segments_csv, Detector, MonteCarloConfig,
};
use kanrd::kan::{prune, train, KanModel, TrainReport};
use kanrd::oscfar::{os_cfar_detect, OsCfarConfig};
use kanrd::pipeline::{detect, detections_json, write_detections_csv, BBox};
use kanrd::rdmap::io::{read_map, write_map};
use kanrd::rdmap::{compute_rd_map, RDMap, SegmentShape};
use kanrd::sim::io::{read_cube, write_cube};
use kanrd::sim::{synth_if_cube, ExtendedTarget, NoiseSpec};
use kanrd::symbolic::{fit_decay_rates, snap};
use kanrd::{Error, Result};

use crate::config::ExperimentConfig;
use crate::roster::{resolve, resolve_all};

const SEGMENT_STREAM: u64 = 1 << 32;
const SPLIT_STREAM: u64 = (1 << 32) + 1;
const EVAL_STREAM: u64 = (1 << 32) + 2;

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

#[derive(Serialize)]
struct DwellTruth<'a> {
    dwell: usize,
    seed: u64,
    snr_db: f64,
    boxes: Vec<BBox>,
    targets: &'a [ExtendedTarget],
}

/// Writes `dwell_XXXX.{cube,f32,json}` and `dwell_XXXX_truth.json` per
/// dwell, plus `segments.csv` when labelled segments are requested.
pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let sim = &cfg.simulate;
    cfg.scenario.validate()?;
    if !sim.snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("snr_db must be finite, got {}", sim.snr_db)));
    }
    let dir = out_dir(cfg)?;
    for i in 0..sim.dwells {
        let seed = derive_seed(cfg.seed, &[i as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = sample_scene(&mut rng, &cfg.scenario)?;
        let cube = synth_if_cube(&scene, &cfg.scenario.radar, NoiseSpec::PeakSnrDb(sim.snr_db), &mut rng)?;
        let map = compute_rd_map(&cube)?;
        let stem = format!("dwell_{i:04}");
        if sim.write_cubes {
            write_cube(BufWriter::new(File::create(dir.join(format!("{stem}.cube")))?), &cube)?;
        }
        write_map(dir, &stem, &map)?;
        let truth = DwellTruth {
            dwell: i,
            seed,
            snr_db: sim.snr_db,
            boxes: scene.iter().map(|t| ground_truth(&map.geometry, t)).collect(),
            targets: &scene,
        };
        write_json(&dir.join(format!("{stem}_truth.json")), &truth)?;
    }
    info!("wrote {} dwells to {}", sim.dwells, dir.display());
    if sim.segment_dwells > 0 {
        let spec = cfg.train.dataset_spec(&cfg.scenario);
        let samples = generate_segments(&spec, sim.segment_dwells, derive_seed(cfg.seed, &[SEGMENT_STREAM]))?;
        write_segments_csv(BufWriter::new(File::create(dir.join("segments.csv"))?), &samples)?;
        info!("wrote {} labelled segments", samples.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    m_bins: usize,
    n_train: usize,
    n_test: usize,
    report: TrainReport,
    test_accuracy: f64,
    pruned_test_accuracy: f64,
    snapped_test_accuracy: f64,
    active_edges: usize,
    used_inputs: Vec<usize>,
    rule: String,
}

/// Trains an `[M, 2]` network, prunes it and snaps it to a closed-form rule.
/// Reads `<data>/segments.csv` when `data` is given, otherwise simulates.
pub fn train_cmd(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<()> {
    let t = &cfg.train;
    if !(t.test_fraction >= 0.0 && t.test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test_fraction {} outside [0, 1)", t.test_fraction)));
    }
    if t.m_bins < 2 {
        return Err(Error::InvalidConfig(format!("m_bins must be >= 2, got {}", t.m_bins)));
    }
    let samples = match data {
        Some(dir) => {
            let path = if dir.is_dir() { dir.join("segments.csv") } else { dir.to_path_buf() };
            read_segments_csv(BufReader::new(File::open(&path)?))?
        }
        None => generate_segments(&t.dataset_spec(&cfg.scenario), t.dwells, derive_seed(cfg.seed, &[SEGMENT_STREAM]))?,
    };
    let all = featurize(&samples, t.m_bins)?;
    all.check_trainable()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[SPLIT_STREAM]));
    let (test, train_set) = all.split(t.test_fraction, &mut rng);
    train_set.check_trainable()?;
    info!("training M={} on {} segments ({} held out)", t.m_bins, train_set.len(), test.len());

    let init = KanModel::detector(t.m_bins, cfg.seed)?;
    let trained = train(&init, &train_set, (!test.is_empty()).then_some(&test), &t.options)?;
    let (pruned, _) = prune(&trained.model, &train_set, &t.prune)?;
    let rule = snap(&pruned)?;
    let acc = |c: &dyn kanrd::SegmentClassifier| {
        if test.is_empty() {
            return f64::NAN;
        }
        let hits = test.inputs.iter().zip(&test.labels).filter(|(x, &y)| c.decide(x).label() == y).count();
        hits as f64 / test.len() as f64
    };

    let dir = out_dir(cfg)?;
    trained.model.save(&dir.join("model_full.json"))?;
    pruned.save(&dir.join("model.json"))?;
    fs::write(dir.join("rule.json"), rule.to_json()?)?;
    let summary = TrainSummary {
        m_bins: t.m_bins,
        n_train: train_set.len(),
        n_test: test.len(),
        test_accuracy: acc(&trained.model),
        pruned_test_accuracy: acc(&pruned),
        snapped_test_accuracy: acc(&rule),
        active_edges: pruned.active_edge_count(),
        used_inputs: pruned.used_inputs(),
        rule: rule.to_string(),
        report: trained.report,
    };
    write_json(&dir.join("train_report.json"), &summary)?;
    println!(
        "M={}  test accuracy: network {:.2}%  pruned {:.2}%  snapped {:.2}%",
        t.m_bins,
        100.0 * summary.test_accuracy,
        100.0 * summary.pruned_test_accuracy,
        100.0 * summary.snapped_test_accuracy
    );
    println!("{rule}");
    Ok(())
}

/// Snaps a saved network to `rule.json` and prints it.
pub fn snap_cmd(cfg: &ExperimentConfig, model: &Path) -> Result<()> {
    let m = KanModel::load(model)?;
    let rule = snap(&m)?;
    fs::write(out_dir(cfg)?.join("rule.json"), rule.to_json()?)?;
    println!("{rule}");
    Ok(())
}

pub enum MapSource {
    /// `.f32` dump with its `.json` sidecar; the path may carry either
    /// extension or none.
    Map(PathBuf),
    Cube(PathBuf),
}

fn load_map(src: &MapSource) -> Result<RDMap> {
    match src {
        MapSource::Map(p) => {
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::InvalidArgument(format!("bad map path {}", p.display())))?;
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            read_map(dir, stem)
        }
        MapSource::Cube(p) => compute_rd_map(&read_cube(BufReader::new(File::open(p)?))?),
    }
}

/// Runs one detector on one map; writes `detections.csv` and
/// `detections.json`.
pub fn detect_cmd(cfg: &ExperimentConfig, src: &MapSource, detector: &str) -> Result<()> {
    cfg.pipeline.validate()?;
    let det = resolve(detector, &cfg.pipeline)?;
    let map = load_map(src)?;
    let dir = out_dir(cfg)?;
    let csv = BufWriter::new(File::create(dir.join("detections.csv"))?);
    let n = match &det {
        Detector::Segment { classifier, pipeline, .. } => {
            let dets = detect(&map, classifier.as_ref(), pipeline)?;
            write_detections_csv(csv, &map, &dets)?;
            fs::write(dir.join("detections.json"), detections_json(&map, &dets)?)?;
            dets.len()
        }
        Detector::OsCfar { config, .. } => {
            let dets = os_cfar_detect(&map, config)?;
            kanrd::oscfar::write_detections_csv(csv, &dets)?;
            write_json(&dir.join("detections.json"), &dets)?;
            dets.len()
        }
    };
    println!("{detector}: {n} detections");
    Ok(())
}

/// Monte Carlo comparison of the roster; writes `report.json`,
/// `curves.csv` and, with labelled segments enabled, `kde.csv`.
pub fn eval_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let detectors = resolve_all(&cfg.detectors, &cfg.pipeline)?;
    let mc = MonteCarloConfig {
        snr_grid: cfg.snr_grid.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        keep_trials: cfg.keep_trials,
    };
    info!(
        "{} detectors x {} SNR points x {} trials",
        detectors.len(),
        mc.snr_grid.len(),
        mc.trials
    );
    let mut report = run_monte_carlo(&cfg.scenario, &detectors, &mc)?;

    if cfg.eval_dwells > 0 {
        let spec = cfg.train.dataset_spec(&cfg.scenario);
        let samples = generate_segments(&spec, cfg.eval_dwells, derive_seed(cfg.seed, &[EVAL_STREAM]))?;
        let mut done_m = Vec::new();
        for d in &detectors {
            let Detector::Segment { id, classifier, .. } = d else { continue };
            let m = classifier.arity();
            let data = featurize(&samples, m)?;
            report.accuracy.extend(accuracy_table(classifier.as_ref(), &[(id.as_str(), &data)])?);
            if report.kde.is_empty() {
                report.kde = kde_export(classifier.as_ref(), &data)?;
            }
            if !done_m.contains(&m) {
                report.decay_rates.push(fit_decay_rates(&data)?);
                done_m.push(m);
            }
        }
    }

    let dir = out_dir(cfg)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    report.write_curves_csv(BufWriter::new(File::create(dir.join("curves.csv"))?))?;
    if !report.kde.is_empty() {
        kanrd::eval::write_kde_csv(BufWriter::new(File::create(dir.join("kde.csv"))?), &report.kde)?;
    }
    for c in &report.curves {
        println!("{}", c.detector);
        for p in &c.points {
            println!("  {:>6.1} dB  pd {:.3}  pfa {:.3e}", p.snr_db, p.pd, p.pfa);
        }
    }
    for a in &report.accuracy {
        println!("accuracy {} (M={}): {:.2}%", a.scenario, a.m_bins, a.accuracy_pct);
    }
    Ok(())
}

/// Timing of the segment pipeline against OS-CFAR; writes `timing.csv` and
/// `timing.json`.
pub fn bench_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let b = &cfg.bench;
    let Detector::Segment { classifier, pipeline, .. } = resolve(&b.detector, &cfg.pipeline)? else {
        return Err(Error::InvalidConfig(format!("bench detector `{}` is not a segment classifier", b.detector)));
    };
    let windows = b
        .windows
        .iter()
        .map(|&(r, d)| SegmentShape::new(r, d))
        .collect::<Result<Vec<_>>>()?;
    let cfar = OsCfarConfig::design(b.oscfar_pfa)?;
    let table = runtime_compare(classifier.as_ref(), &pipeline, &cfar, &b.sizes, &windows, b.repeats, cfg.seed)?;
    let dir = out_dir(cfg)?;
    table.write_csv(BufWriter::new(File::create(dir.join("timing.csv"))?))?;
    write_json(&dir.join("timing.json"), &table)?;
    for r in &table.rows {
        println!(
            "{:>5}x{:<4} segment {:>10.3} ms  oscfar {:>10.3} ms",
            r.n_range,
            r.n_doppler,
            r.kan_ns / 1e6,
            r.oscfar_ns / 1e6
        );
    }
    println!(
        "exponent vs cells: segment {:.2}  oscfar {:.2}; oscfar per CUT vs N_ref log N_ref: {:.2}",
        table.kan_exponent, table.oscfar_exponent, table.nref_exponent
    );
    Ok(())
}
