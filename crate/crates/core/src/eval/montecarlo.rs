use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::scenario::{ground_truth, sample_scene, Scenario};
use super::tables::{AccuracyRow, KdeSample};
use crate::hypothesis::SegmentClassifier;
use crate::oscfar::{cut_count, order_statistics, OsCfarConfig};
use crate::pipeline::{detect, segment_count, BBox, PipelineConfig};
use crate::rdmap::{compute_rd_map, RDMap};
use crate::sim::{synth_if_cube, NoiseSpec};
use crate::symbolic::{builtin, DecayRates};
use crate::{Error, Result};

/// A detector run on every simulated map.
#[derive(Clone)]
pub enum Detector {
    /// Segment sweep with a histogram classifier.
    Segment {
        id: String,
        classifier: Arc<dyn SegmentClassifier>,
        pipeline: PipelineConfig,
    },
    OsCfar { id: String, config: OsCfarConfig },
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Segment { id, pipeline, .. } => f
                .debug_struct("Segment")
                .field("id", id)
                .field("pipeline", pipeline)
                .finish_non_exhaustive(),
            Self::OsCfar { id, config } => f.debug_struct("OsCfar").field("id", id).field("config", config).finish(),
        }
    }
}

impl Detector {
    pub fn segment(id: impl Into<String>, classifier: Arc<dyn SegmentClassifier>) -> Self {
        Self::Segment {
            id: id.into(),
            classifier,
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Self::Segment { id, .. } | Self::OsCfar { id, .. } => id,
        }
    }
}

/// Resolves a built-in detector name: a built-in rule such as
/// `paper-eq7-m10`, or `oscfar@<pfa>` for the default OS-CFAR window.
pub fn detector_from_id(id: &str) -> Result<Detector> {
    if let Some(p) = id.strip_prefix("oscfar@") {
        let pfa: f64 = p
            .parse()
            .map_err(|_| Error::UnknownDetector(format!("{id}: bad false-alarm probability")))?;
        return Ok(Detector::OsCfar {
            id: id.to_string(),
            config: OsCfarConfig::design(pfa)?,
        });
    }
    Ok(Detector::segment(id, Arc::new(builtin(id)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloConfig {
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Keep every per-trial record in the report.
    pub keep_trials: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            snr_grid: (-5..=5).map(|k| 5.0 * k as f64).collect(),
            trials: 350,
            seed: 0,
            keep_trials: false,
        }
    }
}

/// Counts from scoring one detector on one map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    /// Targets counted as detected.
    pub detected: usize,
    /// Detection boxes or CUTs touching no ground-truth region.
    pub false_alarms: usize,
}

/// Fraction of `gt` cells covered by the union of `boxes`.
pub fn coverage(gt: &BBox, boxes: &[BBox]) -> f64 {
    let mut covered = 0usize;
    for r in gt.r0..=gt.r1 {
        for d in gt.d0..=gt.d1 {
            if boxes.iter().any(|b| b.contains(r, d)) {
                covered += 1;
            }
        }
    }
    covered as f64 / gt.area() as f64
}

/// Segment scoring: a target is detected when at least `min_coverage` of its
/// ground-truth cells lie inside detection boxes; a box touching no
/// ground-truth region is a false alarm.
pub fn score_segments(boxes: &[BBox], gts: &[BBox], min_coverage: f64) -> Score {
    Score {
        detected: gts.iter().filter(|g| coverage(g, boxes) >= min_coverage).count(),
        false_alarms: boxes
            .iter()
            .filter(|b| gts.iter().all(|g| b.intersection(g).is_none()))
            .count(),
    }
}

/// CUT scoring: a target is detected when any detected CUT lies in its
/// ground-truth region; a CUT outside every region is a false alarm.
pub fn score_cuts(cuts: &[(usize, usize)], gts: &[BBox]) -> Score {
    Score {
        detected: gts
            .iter()
            .filter(|g| cuts.iter().any(|&(r, d)| g.contains(r, d)))
            .count(),
        false_alarms: cuts
            .iter()
            .filter(|&&(r, d)| gts.iter().all(|g| !g.contains(r, d)))
            .count(),
    }
}

/// Ground-truth coverage needed for a segment detector to count a target.
pub const SEGMENT_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub snr_db: f64,
    pub trial: usize,
    pub detector: String,
    pub detections: usize,
    pub ground_truth: Vec<BBox>,
    /// Detected fraction of the targets; `None` for an empty scene.
    pub pd_contrib: Option<f64>,
    pub fa_count: usize,
    /// Segments or CUTs tested on this map.
    pub tested: usize,
    #[serde(skip)]
    pub runtime_ns: u128,
    /// Diagnostic of a failed trial, which is then excluded from the curves.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub pd: f64,
    pub pfa: f64,
    pub mean_detections: f64,
    /// Fraction of trials whose detection count equals the target count.
    pub exact_count_rate: f64,
    pub trials: usize,
    pub failed: usize,
    pub detected_targets: usize,
    pub total_targets: usize,
    pub false_alarms: usize,
    pub tested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorCurve {
    pub detector: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalReport {
    pub config: MonteCarloConfig,
    pub scenario: Scenario,
    pub curves: Vec<DetectorCurve>,
    pub accuracy: Vec<AccuracyRow>,
    pub decay_rates: Vec<DecayRates>,
    pub kde: Vec<KdeSample>,
    pub trials: Vec<TrialResult>,
}

impl EvalReport {
    pub fn curve(&self, detector: &str) -> Option<&DetectorCurve> {
        self.curves.iter().find(|c| c.detector == detector)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per (SNR, detector): `snr_db,detector,pd,pfa`.
    pub fn write_curves_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["snr_db", "detector", "pd", "pfa"])?;
        for c in &self.curves {
            for p in &c.points {
                out.write_record(&[p.snr_db.to_string(), c.detector.clone(), p.pd.to_string(), p.pfa.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

struct Outcome {
    detections: usize,
    score: Score,
    tested: usize,
    runtime_ns: u128,
}

/// OS-CFAR detectors sharing a reference window and rank reuse one pass of
/// order statistics.
fn run_detectors(map: &RDMap, gts: &[BBox], detectors: &[Detector]) -> Vec<Result<Outcome>> {
    let mut results: Vec<Option<Result<Outcome>>> = (0..detectors.len()).map(|_| None).collect();
    let mut groups: BTreeMap<(usize, usize, usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, det) in detectors.iter().enumerate() {
        match det {
            Detector::Segment { classifier, pipeline, .. } => {
                let t = Instant::now();
                let r = detect(map, classifier.as_ref(), pipeline).map(|dets| {
                    let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
                    Outcome {
                        detections: dets.len(),
                        score: score_segments(&boxes, gts, SEGMENT_COVERAGE),
                        tested: segment_count(map, pipeline),
                        runtime_ns: 0,
                    }
                });
                let ns = t.elapsed().as_nanos();
                results[i] = Some(r.map(|o| Outcome { runtime_ns: ns, ..o }));
            }
            Detector::OsCfar { config, .. } => match config.validate() {
                Err(e) => results[i] = Some(Err(e)),
                Ok(()) => {
                    let key = (
                        config.window.range_cells,
                        config.window.doppler_cells,
                        config.guard.0,
                        config.guard.1,
                        config.k_rank,
                    );
                    groups.entry(key).or_default().push(i);
                }
            },
        }
    }
    for members in groups.values() {
        let Detector::OsCfar { config: first, .. } = &detectors[members[0]] else {
            unreachable!()
        };
        let t = Instant::now();
        let stats = order_statistics(map, first.window, first.guard, first.k_rank);
        let shared_ns = t.elapsed().as_nanos();
        let tested = cut_count(map, first.window);
        for &i in members {
            let Detector::OsCfar { config, .. } = &detectors[i] else {
                unreachable!()
            };
            let t = Instant::now();
            let cuts: Vec<(usize, usize)> = stats
                .iter()
                .filter(|&&(_, _, p, s)| p > config.alpha * s)
                .map(|&(r, d, _, _)| (r, d))
                .collect();
            results[i] = Some(Ok(Outcome {
                detections: cuts.len(),
                score: score_cuts(&cuts, gts),
                tested,
                runtime_ns: shared_ns + t.elapsed().as_nanos(),
            }));
        }
    }
    results.into_iter().map(|r| r.expect("every detector scored")).collect()
}

fn run_trial(
    scenario: &Scenario,
    detectors: &[Detector],
    snr_db: f64,
    trial: usize,
    seed: u64,
) -> Vec<TrialResult> {
    let base = |detector: &Detector| TrialResult {
        snr_db,
        trial,
        detector: detector.id().to_string(),
        detections: 0,
        ground_truth: Vec::new(),
        pd_contrib: None,
        fa_count: 0,
        tested: 0,
        runtime_ns: 0,
        error: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = sample_scene(&mut rng, scenario).and_then(|scene| {
        let cube = synth_if_cube(&scene, &scenario.radar, NoiseSpec::PeakSnrDb(snr_db), &mut rng)?;
        let map = compute_rd_map(&cube)?;
        let gts: Vec<BBox> = scene.iter().map(|t| ground_truth(&map.geometry, t)).collect();
        Ok((map, gts))
    });
    let (map, gts) = match map {
        Ok(v) => v,
        Err(e) => {
            log::warn!("trial {trial} at {snr_db} dB: scene synthesis failed: {e}");
            return detectors
                .iter()
                .map(|d| TrialResult {
                    error: Some(e.to_string()),
                    ..base(d)
                })
                .collect();
        }
    };
    detectors
        .iter()
        .zip(run_detectors(&map, &gts, detectors))
        .map(|(d, r)| match r {
            Ok(o) => TrialResult {
                detections: o.detections,
                ground_truth: gts.clone(),
                pd_contrib: (!gts.is_empty()).then(|| o.score.detected as f64 / gts.len() as f64),
                fa_count: o.score.false_alarms,
                tested: o.tested,
                runtime_ns: o.runtime_ns,
                ..base(d)
            },
            Err(e) => {
                log::warn!("trial {trial} at {snr_db} dB: detector {} failed: {e}", d.id());
                TrialResult {
                    ground_truth: gts.clone(),
                    error: Some(e.to_string()),
                    ..base(d)
                }
            }
        })
        .collect()
}

fn aggregate(snr_db: f64, rows: &[&TrialResult]) -> CurvePoint {
    let ok: Vec<&&TrialResult> = rows.iter().filter(|t| t.error.is_none()).collect();
    let total_targets: usize = ok.iter().map(|t| t.ground_truth.len()).sum();
    let detected_targets: usize = ok
        .iter()
        .map(|t| (t.pd_contrib.unwrap_or(0.0) * t.ground_truth.len() as f64).round() as usize)
        .sum();
    let false_alarms: usize = ok.iter().map(|t| t.fa_count).sum();
    let tested: usize = ok.iter().map(|t| t.tested).sum();
    let n = ok.len();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    CurvePoint {
        snr_db,
        pd: ratio(detected_targets as f64, total_targets as f64),
        pfa: ratio(false_alarms as f64, tested as f64),
        mean_detections: ratio(ok.iter().map(|t| t.detections).sum::<usize>() as f64, n as f64),
        exact_count_rate: ratio(
            ok.iter().filter(|t| t.detections == t.ground_truth.len()).count() as f64,
            n as f64,
        ),
        trials: n,
        failed: rows.len() - n,
        detected_targets,
        total_targets,
        false_alarms,
        tested,
    }
}

/// Runs every detector on the same simulated maps for each SNR point and
/// aggregates detection and false-alarm rates. Trial `t` at grid index `i`
/// is seeded from `(seed, i, t)` alone, so results do not depend on
/// scheduling.
pub fn run_monte_carlo(scenario: &Scenario, detectors: &[Detector], cfg: &MonteCarloConfig) -> Result<EvalReport> {
    if detectors.is_empty() {
        return Err(Error::InvalidConfig("empty detector roster".into()));
    }
    if cfg.snr_grid.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidConfig("SNR grid and trial count must be non-empty".into()));
    }
    if let Some(s) = cfg.snr_grid.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(format!("SNR {s} dB")));
    }
    let mut ids: Vec<&str> = detectors.iter().map(|d| d.id()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("duplicate detector id".into()));
    }
    scenario.validate()?;
    for d in detectors {
        match d {
            Detector::Segment { pipeline, .. } => pipeline.validate()?,
            Detector::OsCfar { config, .. } => config.validate()?,
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_grid.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let per_trial: Vec<Vec<TrialResult>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            run_trial(
                scenario,
                detectors,
                cfg.snr_grid[i],
                t,
                derive_seed(cfg.seed, &[i as u64, t as u64]),
            )
        })
        .collect();
    let curves = detectors
        .iter()
        .enumerate()
        .map(|(k, det)| DetectorCurve {
            detector: det.id().to_string(),
            points: cfg
                .snr_grid
                .iter()
                .enumerate()
                .map(|(i, &snr)| {
                    let rows: Vec<&TrialResult> = per_trial[i * cfg.trials..(i + 1) * cfg.trials]
                        .iter()
                        .map(|v| &v[k])
                        .collect();
                    aggregate(snr, &rows)
                })
                .collect(),
        })
        .collect();
    Ok(EvalReport {
        config: cfg.clone(),
        scenario: scenario.clone(),
        curves,
        trials: if cfg.keep_trials {
            per_trial.into_iter().flatten().collect()
        } else {
            Vec::new()
        },
        ..EvalReport::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(r0: usize, r1: usize, d0: usize, d1: usize) -> BBox {
        BBox { r0, r1, d0, d1 }
    }

    #[test]
    fn hand_scored_segments() {
        // 4x2 ground truth: cells (10..=13, 5..=6)
        let gt = [b(10, 13, 5, 6)];
        // covers rows 10..=11 only: 4 of 8 cells
        let half = [b(0, 11, 0, 20)];
        assert_eq!(coverage(&gt[0], &half), 0.5);
        assert_eq!(score_segments(&half, &gt, 0.5), Score { detected: 1, false_alarms: 0 });
        // 3 of 8 cells, plus a box far away
        let low = [b(0, 10, 0, 20), b(50, 60, 0, 6)];
        assert_eq!(coverage(&gt[0], &low), 0.25);
        assert_eq!(score_segments(&low, &gt, 0.5), Score { detected: 0, false_alarms: 1 });
        // two boxes jointly cover 6 of 8 cells
        let split = [b(10, 11, 0, 20), b(12, 30, 6, 9)];
        assert_eq!(coverage(&gt[0], &split), 0.75);
        assert_eq!(score_segments(&[], &gt, 0.5), Score::default());
        assert_eq!(score_segments(&half, &[], 0.5), Score { detected: 0, false_alarms: 1 });
    }

    #[test]
    fn hand_scored_cuts() {
        let gts = [b(10, 13, 5, 6), b(40, 42, 60, 62)];
        let cuts = [(10, 5), (13, 6), (14, 6), (0, 0)];
        assert_eq!(score_cuts(&cuts, &gts), Score { detected: 1, false_alarms: 2 });
        assert_eq!(score_cuts(&[(41, 61)], &gts), Score { detected: 1, false_alarms: 0 });
        assert_eq!(score_cuts(&[], &gts), Score::default());
    }

    #[test]
    fn detector_ids() {
        assert!(matches!(detector_from_id("paper-eq7-m10").unwrap(), Detector::Segment { .. }));
        match detector_from_id("oscfar@1e-4").unwrap() {
            Detector::OsCfar { config, .. } => assert!((config.alpha - 7.1911).abs() < 1e-3),
            _ => panic!(),
        }
        assert!(matches!(detector_from_id("oscfar@x"), Err(Error::UnknownDetector(_))));
        assert!(matches!(detector_from_id("cnn"), Err(Error::UnknownDetector(_))));
    }

    fn small() -> MonteCarloConfig {
        MonteCarloConfig {
            snr_grid: vec![-25.0, 25.0],
            trials: 3,
            seed: 11,
            keep_trials: true,
        }
    }

    #[test]
    fn roster_errors() {
        let sc = Scenario::default();
        assert!(run_monte_carlo(&sc, &[], &small()).is_err());
        let d = detector_from_id("oscfar@1e-3").unwrap();
        assert!(run_monte_carlo(&sc, &[d.clone(), d], &small()).is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_complete() {
        let sc = Scenario::default();
        let dets: Vec<Detector> = ["paper-eq7-m10", "oscfar@1e-3", "oscfar@1e-4"]
            .iter()
            .map(|id| detector_from_id(id).unwrap())
            .collect();
        let a = run_monte_carlo(&sc, &dets, &small()).unwrap();
        let b = run_monte_carlo(&sc, &dets, &small()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.curves.len(), 3);
        assert_eq!(a.trials.len(), 2 * 3 * 3);
        for c in &a.curves {
            assert_eq!(c.points.len(), 2);
            for p in &c.points {
                assert_eq!(p.trials + p.failed, 3);
            }
            // bright targets are found by everything
            assert_eq!(c.points[1].pd, 1.0, "{}", c.detector);
        }
        // a looser design threshold never finds fewer CUTs on the same map
        for t in 0..6 {
            let r3 = &a.trials[t * 3 + 1];
            let r4 = &a.trials[t * 3 + 2];
            assert!(r3.detections >= r4.detections);
        }
        let mut csv = Vec::new();
        a.write_curves_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("snr_db,detector,pd,pfa"));
    }
}
