use serde::{Deserialize, Serialize};

use super::{RDMap, SegmentShape};
use crate::error::{Error, Result};

/// Normalized M-bin histogram of a min-max normalized segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin heights `x_0 .. x_{M-1}`; they sum to one.
    pub heights: Vec<f64>,
    /// Set when every cell had the same value; all mass sits in bin 0.
    pub degenerate: bool,
}

impl Histogram {
    pub fn m_bins(&self) -> usize {
        self.heights.len()
    }
}

/// A segment together with its histogram feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeature {
    pub center: (usize, usize),
    pub cells: Vec<f64>,
    pub histogram: Histogram,
}

impl SegmentFeature {
    pub fn m_bins(&self) -> usize {
        self.histogram.m_bins()
    }
}

/// Bins `cells` after min-max normalization into `out.len()` equal-width bins
/// over `[0, 1]`. Bins are closed-left/open-right except the last, which also
/// takes the value 1. Returns `true` for a constant (degenerate) input.
fn bin_into<'a>(cells: impl Iterator<Item = &'a f64> + Clone, out: &mut [f64]) -> bool {
    let m = out.len();
    out.iter_mut().for_each(|h| *h = 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut count = 0usize;
    for &v in cells.clone() {
        lo = lo.min(v);
        hi = hi.max(v);
        count += 1;
    }
    if count == 0 {
        return true;
    }
    if !(hi > lo) {
        out[0] = 1.0;
        return true;
    }
    let scale = m as f64 / (hi - lo);
    for &v in cells {
        let b = (((v - lo) * scale) as usize).min(m - 1);
        out[b] += 1.0;
    }
    let n = count as f64;
    out.iter_mut().for_each(|h| *h /= n);
    false
}

/// Min-max normalizes `cells` and returns their `m_bins` histogram.
pub fn histogram_feature(cells: &[f64], m_bins: usize) -> Result<Histogram> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument("empty segment".into()));
    }
    if m_bins == 0 {
        return Err(Error::InvalidArgument("m_bins must be >= 1".into()));
    }
    if cells.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("segment contains non-finite cells".into()));
    }
    let mut heights = vec![0.0; m_bins];
    let degenerate = bin_into(cells.iter(), &mut heights);
    Ok(Histogram { heights, degenerate })
}

/// Histogram of the segment centred at `(r, d)` read straight from the map
/// into `out`; the caller guarantees the segment fits. Returns the degenerate
/// flag.
pub fn segment_histogram(map: &RDMap, (r, d): (usize, usize), shape: SegmentShape, out: &mut [f64]) -> bool {
    let (hr, hd) = (shape.half_range(), shape.half_doppler());
    let rows = (r - hr..=r + hr).map(|row| &map.power.row(row)[d - hd..=d + hd]);
    let n = shape.n_cells();
    if n > STACK_CELLS {
        return bin_into(rows.flatten(), out);
    }
    let mut buf = [0.0; STACK_CELLS];
    let mut at = 0;
    for row in rows {
        buf[at..at + row.len()].copy_from_slice(row);
        at += row.len();
    }
    bin_into(buf[..n].iter(), out)
}

const STACK_CELLS: usize = 512;
