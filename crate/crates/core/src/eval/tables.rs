use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::hypothesis::SegmentClassifier;
use crate::kan::Dataset;
use crate::oscfar::{cut_count, os_cfar_detect, reference_count, OsCfarConfig};
use crate::pipeline::{detect, segment_count, PipelineConfig};
use crate::rdmap::{RDMap, SegmentShape};
use crate::sim::RadarConfig;
use crate::stats::power_law_exponent;
use crate::{Error, Grid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// Free-form set label, e.g. `in-distribution` or `shifted/post-fine-tune`.
    pub scenario: String,
    pub m_bins: usize,
    pub n_h0: usize,
    pub n_h1: usize,
    pub accuracy_pct: f64,
}

/// Accuracy of `clf` on each labelled set.
pub fn accuracy_table<C: SegmentClassifier + ?Sized>(clf: &C, sets: &[(&str, &Dataset)]) -> Result<Vec<AccuracyRow>> {
    sets.iter()
        .map(|(tag, data)| {
            if data.arity() != clf.arity() {
                return Err(Error::dimension(clf.arity(), data.arity()));
            }
            let [n_h0, n_h1] = data.class_counts();
            let correct = data
                .inputs
                .iter()
                .zip(&data.labels)
                .filter(|(x, &y)| clf.decide(x).label() == y)
                .count();
            Ok(AccuracyRow {
                scenario: tag.to_string(),
                m_bins: data.arity(),
                n_h0,
                n_h1,
                accuracy_pct: if data.is_empty() { 0.0 } else { 100.0 * correct as f64 / data.len() as f64 },
            })
        })
        .collect()
}

/// Hypothesis statistics of one labelled segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeSample {
    pub h0: f64,
    pub h1: f64,
    pub label: usize,
}

pub fn kde_export<C: SegmentClassifier + ?Sized>(clf: &C, data: &Dataset) -> Result<Vec<KdeSample>> {
    if !data.is_empty() && data.arity() != clf.arity() {
        return Err(Error::dimension(clf.arity(), data.arity()));
    }
    Ok(data
        .inputs
        .iter()
        .zip(&data.labels)
        .map(|(x, &label)| {
            let (h0, h1) = clf.statistics(x);
            KdeSample { h0, h1, label }
        })
        .collect())
}

pub fn write_kde_csv<W: Write>(w: W, samples: &[KdeSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["h0", "h1", "label"])?;
    for s in samples {
        out.write_record(&[s.h0.to_string(), s.h1.to_string(), s.label.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Wall-clock per dwell at one map size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub n_range: usize,
    pub n_doppler: usize,
    pub cells: usize,
    pub segments: usize,
    pub cuts: usize,
    pub kan_ns: f64,
    pub oscfar_ns: f64,
}

/// OS-CFAR cost per CUT for one reference window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrefRow {
    pub window: SegmentShape,
    pub n_ref: usize,
    pub ns_per_cut: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeTable {
    pub rows: Vec<RuntimeRow>,
    /// Power-law exponent of KAN-pipeline time against cell count.
    pub kan_exponent: f64,
    /// Power-law exponent of OS-CFAR time against cell count.
    pub oscfar_exponent: f64,
    pub nref_rows: Vec<NrefRow>,
    /// Power-law exponent of OS-CFAR time per CUT against `N_ref log N_ref`.
    pub nref_exponent: f64,
}

impl RuntimeTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n_range", "n_doppler", "cells", "kan_ns", "oscfar_ns"])?;
        for r in &self.rows {
            out.write_record(&[
                r.n_range.to_string(),
                r.n_doppler.to_string(),
                r.cells.to_string(),
                format!("{:.0}", r.kan_ns),
                format!("{:.0}", r.oscfar_ns),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Noise-only square-law map of arbitrary size with unit mean cells.
pub fn noise_map(n_range: usize, n_doppler: usize, seed: u64) -> Result<RDMap> {
    let mut geometry = RadarConfig::mrr_77ghz().geometry()?;
    geometry.n_range_bins = n_range;
    geometry.n_doppler_bins = n_doppler;
    geometry.max_range = geometry.range_resolution * n_range as f64;
    geometry.max_velocity = geometry.velocity_resolution * n_doppler as f64 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<f64> = (0..n_range * n_doppler).map(|_| Exp1.sample(&mut rng)).collect();
    RDMap::from_power(Grid::from_vec(n_range, n_doppler, cells), geometry)
}

fn median_ns(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut t: Vec<f64> = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed().as_nanos() as f64);
    }
    t.sort_by(f64::total_cmp);
    Ok(t[t.len() / 2])
}

/// Times the segment pipeline and OS-CFAR on noise-only maps of each size,
/// then OS-CFAR alone across reference windows on a fixed map. Each entry is
/// the median of `repeats` runs after one warm-up run.
pub fn runtime_compare<C: SegmentClassifier + ?Sized>(
    clf: &C,
    pipeline: &PipelineConfig,
    oscfar: &OsCfarConfig,
    sizes: &[(usize, usize)],
    windows: &[SegmentShape],
    repeats: usize,
    seed: u64,
) -> Result<RuntimeTable> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two map sizes".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &(n, l) in sizes {
        let map = noise_map(n, l, seed)?;
        let kan_ns = median_ns(repeats, || detect(&map, clf, pipeline).map(|_| ()))?;
        let oscfar_ns = median_ns(repeats, || os_cfar_detect(&map, oscfar).map(|_| ()))?;
        rows.push(RuntimeRow {
            n_range: n,
            n_doppler: l,
            cells: n * l,
            segments: segment_count(&map, pipeline),
            cuts: cut_count(&map, oscfar.window),
            kan_ns,
            oscfar_ns,
        });
    }
    let cells: Vec<f64> = rows.iter().map(|r| r.cells as f64).collect();
    let kan: Vec<f64> = rows.iter().map(|r| r.kan_ns).collect();
    let cfar: Vec<f64> = rows.iter().map(|r| r.oscfar_ns).collect();

    let (n, l) = sizes[sizes.len() / 2];
    let map = noise_map(n, l, seed ^ 1)?;
    let mut nref_rows = Vec::with_capacity(windows.len());
    for &window in windows {
        let n_ref = reference_count(window, oscfar.guard)?;
        let cfg = OsCfarConfig::with_rank(window, oscfar.guard, crate::oscfar::default_rank(n_ref), oscfar.pfa_design)?;
        let cuts = cut_count(&map, window);
        if cuts == 0 {
            return Err(Error::InvalidArgument(format!("window {window:?} does not fit a {n}x{l} map")));
        }
        let ns = median_ns(repeats, || os_cfar_detect(&map, &cfg).map(|_| ()))?;
        nref_rows.push(NrefRow {
            window,
            n_ref,
            ns_per_cut: ns / cuts as f64,
        });
    }
    let nref_exponent = if nref_rows.len() >= 2 {
        let x: Vec<f64> = nref_rows.iter().map(|r| r.n_ref as f64 * (r.n_ref as f64).ln()).collect();
        let y: Vec<f64> = nref_rows.iter().map(|r| r.ns_per_cut).collect();
        power_law_exponent(&x, &y)
    } else {
        f64::NAN
    };
    Ok(RuntimeTable {
        kan_exponent: power_law_exponent(&cells, &kan),
        oscfar_exponent: power_law_exponent(&cells, &cfar),
        rows,
        nref_rows,
        nref_exponent,
    })
}
