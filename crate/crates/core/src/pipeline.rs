//! Segment detection pipeline: sweep every segment centre, classify its
//! histogram, move hits onto their local peak and suppress duplicates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypothesis::SegmentClassifier;
use crate::rdmap::{segment_histogram, RDMap, SegmentShape};
use crate::{Error, Result};

/// Inclusive rectangle of RD bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub r0: usize,
    pub r1: usize,
    pub d0: usize,
    pub d1: usize,
}

impl BBox {
    /// Segment footprint centred at `(r, d)`; the caller guarantees it fits.
    pub fn around((r, d): (usize, usize), shape: SegmentShape) -> Self {
        Self {
            r0: r - shape.half_range(),
            r1: r + shape.half_range(),
            d0: d - shape.half_doppler(),
            d1: d + shape.half_doppler(),
        }
    }

    pub fn area(&self) -> usize {
        (self.r1 + 1 - self.r0) * (self.d1 + 1 - self.d0)
    }

    pub fn contains(&self, r: usize, d: usize) -> bool {
        (self.r0..=self.r1).contains(&r) && (self.d0..=self.d1).contains(&d)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            r0: self.r0.max(other.r0),
            r1: self.r1.min(other.r1),
            d0: self.d0.max(other.d0),
            d1: self.d1.min(other.d1),
        };
        (b.r0 <= b.r1 && b.d0 <= b.d1).then_some(b)
    }
}

/// Intersection over union in bin counts.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    inter as f64 / (a.area() + b.area() - inter) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentDetection {
    pub center: (usize, usize),
    pub bbox: BBox,
    pub peak_power: f64,
    /// `h1 - h0` at the centre.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub shape: SegmentShape,
    /// Distance between candidate centres along each axis.
    pub stride: usize,
    pub iou_threshold: f64,
    pub max_recenter: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            shape: SegmentShape::VEHICLE,
            stride: 1,
            iou_threshold: 0.4,
            max_recenter: 5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidConfig(format!("iou threshold {} outside [0, 1]", self.iou_threshold)));
        }
        SegmentShape::new(self.shape.range_cells, self.shape.doppler_cells)?;
        Ok(())
    }
}

/// Candidate centres visited by the sweep.
pub fn segment_count(map: &RDMap, cfg: &PipelineConfig) -> usize {
    cfg.shape
        .centre_bounds(map.n_range(), map.n_doppler())
        .map_or(0, |((r0, r1), (d0, d1))| {
            ((r1 - r0) / cfg.stride + 1) * ((d1 - d0) / cfg.stride + 1)
        })
}

/// Classifies every candidate centre and returns the `H1` segments in
/// row-major order. Degenerate (constant) segments count as `H0`.
pub fn sweep_classify<C: SegmentClassifier + ?Sized>(
    map: &RDMap,
    clf: &C,
    cfg: &PipelineConfig,
) -> Result<Vec<SegmentDetection>> {
    cfg.validate()?;
    let Some(((r0, r1), (d0, d1))) = cfg.shape.centre_bounds(map.n_range(), map.n_doppler()) else {
        return Err(Error::InvalidArgument(format!(
            "{}x{} map is smaller than one segment",
            map.n_range(),
            map.n_doppler()
        )));
    };
    let m = clf.arity();
    let rows: Vec<usize> = (r0..=r1).step_by(cfg.stride).collect();
    Ok(rows
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut hist = vec![0.0; m];
            (d0..=d1)
                .step_by(cfg.stride)
                .filter_map(|d| {
                    if segment_histogram(map, (r, d), cfg.shape, &mut hist) {
                        return None;
                    }
                    let margin = clf.margin(&hist);
                    (margin > 0.0).then(|| SegmentDetection {
                        center: (r, d),
                        bbox: BBox::around((r, d), cfg.shape),
                        peak_power: map.at(r, d),
                        margin,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Moves the centre to the strongest cell of its block until it stops
/// moving or `max_iter` moves were made. The current centre wins ties;
/// otherwise the lowest range bin, then the lowest Doppler bin. Centres are
/// kept where a full segment fits.
pub fn recenter(map: &RDMap, det: &SegmentDetection, shape: SegmentShape, max_iter: usize) -> SegmentDetection {
    let Some(((rmin, rmax), (dmin, dmax))) = shape.centre_bounds(map.n_range(), map.n_doppler()) else {
        return *det;
    };
    let mut center = det.center;
    for _ in 0..max_iter {
        let b = BBox::around(center, shape);
        let mut best = center;
        let mut best_p = map.at(center.0, center.1);
        for r in b.r0..=b.r1 {
            for d in b.d0..=b.d1 {
                let p = map.at(r, d);
                if p > best_p {
                    best = (r, d);
                    best_p = p;
                }
            }
        }
        let next = (best.0.clamp(rmin, rmax), best.1.clamp(dmin, dmax));
        if next == center || map.at(next.0, next.1) <= map.at(center.0, center.1) {
            break;
        }
        center = next;
    }
    SegmentDetection {
        center,
        bbox: BBox::around(center, shape),
        peak_power: map.at(center.0, center.1),
        margin: det.margin,
    }
}

/// Greedy suppression: strongest first, dropping any detection whose IoU
/// with an already kept one exceeds `threshold`.
pub fn nms(dets: &[SegmentDetection], threshold: f64) -> Vec<SegmentDetection> {
    let mut order: Vec<&SegmentDetection> = dets.iter().collect();
    order.sort_by(|a, b| b.peak_power.total_cmp(&a.peak_power).then(a.center.cmp(&b.center)));
    let mut kept: Vec<SegmentDetection> = Vec::new();
    for d in order {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= threshold) {
            kept.push(*d);
        }
    }
    kept
}

/// Sweep, recentre (re-scoring the margin at the new centre) and suppress.
pub fn detect<C: SegmentClassifier + ?Sized>(map: &RDMap, clf: &C, cfg: &PipelineConfig) -> Result<Vec<SegmentDetection>> {
    let hits = sweep_classify(map, clf, cfg)?;
    let mut hist = vec![0.0; clf.arity()];
    let mut moved: Vec<SegmentDetection> = hits
        .iter()
        .map(|h| recenter(map, h, cfg.shape, cfg.max_recenter))
        .collect();
    moved.sort_by_key(|d| d.center);
    moved.dedup_by_key(|d| d.center);
    for d in &mut moved {
        if !segment_histogram(map, d.center, cfg.shape, &mut hist) {
            d.margin = clf.margin(&hist);
        }
    }
    Ok(nms(&moved, cfg.iou_threshold))
}

/// Detection expressed in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub bbox: BBox,
    pub margin: f64,
    pub peak_power: f64,
}

impl DetectionRecord {
    pub fn new(map: &RDMap, d: &SegmentDetection) -> Self {
        let g = &map.geometry;
        Self {
            range_m: g.range_of_bin(d.center.0 as f64),
            velocity_mps: g.velocity_of_bin(d.center.1 as f64),
            range_bin: d.center.0,
            doppler_bin: d.center.1,
            bbox: d.bbox,
            margin: d.margin,
            peak_power: d.peak_power,
        }
    }
}

pub fn write_detections_csv<W: Write>(w: W, map: &RDMap, dets: &[SegmentDetection]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "range_m",
        "velocity_mps",
        "range_bin",
        "doppler_bin",
        "r0",
        "r1",
        "d0",
        "d1",
        "margin",
        "peak_power",
    ])?;
    for d in dets {
        let rec = DetectionRecord::new(map, d);
        out.write_record(&[
            rec.range_m.to_string(),
            rec.velocity_mps.to_string(),
            rec.range_bin.to_string(),
            rec.doppler_bin.to_string(),
            rec.bbox.r0.to_string(),
            rec.bbox.r1.to_string(),
            rec.bbox.d0.to_string(),
            rec.bbox.d1.to_string(),
            rec.margin.to_string(),
            rec.peak_power.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn detections_json(map: &RDMap, dets: &[SegmentDetection]) -> Result<String> {
    let recs: Vec<DetectionRecord> = dets.iter().map(|d| DetectionRecord::new(map, d)).collect();
    Ok(serde_json::to_string_pretty(&recs)?)
}
