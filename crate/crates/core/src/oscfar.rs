//! Two-dimensional ordered-statistics CFAR over a reference window that
//! matches the RD segment, with guard cells around the cell under test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rdmap::{RDMap, SegmentShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsCfarConfig {
    /// Full reference window including guard cells and the CUT.
    pub window: SegmentShape,
    /// Guard half-widths along (range, Doppler).
    pub guard: (usize, usize),
    /// 1-based rank of the order statistic used as the noise estimate.
    pub k_rank: usize,
    pub pfa_design: f64,
    /// Threshold multiplier applied to the k-th smallest reference cell.
    pub alpha: f64,
}

impl OsCfarConfig {
    /// 17x7 window, [2,1] guard cells, k = round(0.75 N_ref), alpha solved
    /// for `pfa` on exponential noise.
    pub fn design(pfa: f64) -> Result<Self> {
        let window = SegmentShape::VEHICLE;
        let guard = (2, 1);
        let n_ref = reference_count(window, guard)?;
        let k_rank = default_rank(n_ref);
        Self::with_rank(window, guard, k_rank, pfa)
    }

    pub fn with_rank(window: SegmentShape, guard: (usize, usize), k_rank: usize, pfa: f64) -> Result<Self> {
        let n_ref = reference_count(window, guard)?;
        let alpha = solve_alpha(pfa, n_ref, k_rank)?;
        Ok(Self {
            window,
            guard,
            k_rank,
            pfa_design: pfa,
            alpha,
        })
    }

    pub fn n_ref(&self) -> usize {
        reference_count(self.window, self.guard).expect("validated at construction")
    }

    pub fn validate(&self) -> Result<()> {
        let n_ref = reference_count(self.window, self.guard)?;
        if self.k_rank == 0 || self.k_rank > n_ref {
            return Err(Error::InvalidArgument(format!(
                "k_rank {} outside 1..={n_ref}",
                self.k_rank
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha {} must be > 0", self.alpha)));
        }
        Ok(())
    }
}

/// `round(0.75 * n_ref)`, at least 1.
pub fn default_rank(n_ref: usize) -> usize {
    ((0.75 * n_ref as f64).round() as usize).clamp(1, n_ref)
}

/// Reference cells in `window` once the guard block (CUT included) is removed.
pub fn reference_count(window: SegmentShape, (gr, gd): (usize, usize)) -> Result<usize> {
    let guard = (2 * gr + 1) * (2 * gd + 1);
    if 2 * gr + 1 > window.range_cells || 2 * gd + 1 > window.doppler_cells || guard >= window.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "guard ({gr},{gd}) leaves no reference cells in a {}x{} window",
            window.range_cells, window.doppler_cells
        )));
    }
    Ok(window.n_cells() - guard)
}

/// False-alarm probability of OS-CFAR on i.i.d. exponential noise:
/// `prod_{i<k} (n - i) / (n - i + alpha)`.
pub fn os_pfa(alpha: f64, n_ref: usize, k_rank: usize) -> f64 {
    (0..k_rank)
        .map(|i| {
            let m = (n_ref - i) as f64;
            (m / (m + alpha)).ln()
        })
        .sum::<f64>()
        .exp()
}

/// Threshold multiplier achieving `pfa`, by bisection (the false-alarm
/// probability decreases monotonically in alpha).
pub fn solve_alpha(pfa: f64, n_ref: usize, k_rank: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidArgument(format!("pfa {pfa} must lie in (0, 1)")));
    }
    if k_rank == 0 || k_rank > n_ref {
        return Err(Error::InvalidArgument(format!("k_rank {k_rank} outside 1..={n_ref}")));
    }
    let target = pfa.ln();
    let log_pfa = |a: f64| os_pfa(a, n_ref, k_rank).ln();
    let mut hi = 1.0;
    while log_pfa(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if log_pfa(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutDetection {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub power: f64,
    pub threshold: f64,
}

fn reference_offsets(window: SegmentShape, (gr, gd): (usize, usize)) -> Vec<(isize, isize)> {
    let (hr, hd) = (window.half_range() as isize, window.half_doppler() as isize);
    let mut offs = Vec::new();
    for dr in -hr..=hr {
        for dd in -hd..=hd {
            if dr.unsigned_abs() <= gr && dd.unsigned_abs() <= gd {
                continue;
            }
            offs.push((dr, dd));
        }
    }
    offs
}

/// k-th smallest reference cell for every CUT whose window fits inside the
/// map, as `(range_bin, doppler_bin, cut_power, statistic)` in row-major CUT
/// order. Each reference set is fully sorted.
pub fn order_statistics(map: &RDMap, window: SegmentShape, guard: (usize, usize), k_rank: usize) -> Vec<(usize, usize, f64, f64)> {
    let Some(((r0, r1), (d0, d1))) = window.centre_bounds(map.n_range(), map.n_doppler()) else {
        return Vec::new();
    };
    let offs = reference_offsets(window, guard);
    (r0..=r1)
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut buf = Vec::with_capacity(offs.len());
            let offs = &offs;
            (d0..=d1)
                .map(move |d| {
                    buf.clear();
                    buf.extend(offs.iter().map(|&(dr, dd)| {
                        map.at((r as isize + dr) as usize, (d as isize + dd) as usize)
                    }));
                    buf.sort_unstable_by(f64::total_cmp);
                    (r, d, map.at(r, d), buf[k_rank - 1])
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Runs OS-CFAR over every CUT with a full reference window (edge CUTs are
/// skipped).
pub fn os_cfar_detect(map: &RDMap, cfg: &OsCfarConfig) -> Result<Vec<CutDetection>> {
    cfg.validate()?;
    Ok(order_statistics(map, cfg.window, cfg.guard, cfg.k_rank)
        .into_iter()
        .filter_map(|(r, d, p, stat)| {
            let threshold = cfg.alpha * stat;
            (p > threshold).then_some(CutDetection {
                range_bin: r,
                doppler_bin: d,
                power: p,
                threshold,
            })
        })
        .collect())
}

/// Number of CUTs tested on a map (those with a full window).
pub fn cut_count(map: &RDMap, window: SegmentShape) -> usize {
    window
        .centre_bounds(map.n_range(), map.n_doppler())
        .map_or(0, |((r0, r1), (d0, d1))| (r1 - r0 + 1) * (d1 - d0 + 1))
}

pub fn write_detections_csv<W: std::io::Write>(w: W, dets: &[CutDetection]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cut_range_bin", "cut_doppler_bin", "power", "threshold"])?;
    for d in dets {
        out.write_record(&[
            d.range_bin.to_string(),
            d.doppler_bin.to_string(),
            format!("{}", d.power),
            format!("{}", d.threshold),
        ])?;
    }
    out.flush()?;
    Ok(())
}
