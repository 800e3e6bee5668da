use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{ground_truth, sample_scene, Scenario};
use super::derive_seed;
use crate::kan::Dataset;
use crate::pipeline::BBox;
use crate::rdmap::{compute_rd_map, extract_segment, histogram_feature, RDMap, SegmentShape};
use crate::sim::{synth_if_cube, NoiseSpec};
use crate::{Error, Result};

/// Labelled segment generation: every simulated dwell holds one target and
/// yields one `H1` segment centred on the strongest noisy cell inside the
/// target's ground-truth box and one `H0` segment drawn away from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub scenario: Scenario,
    /// Peak SNR drawn uniformly per dwell (dB).
    pub snr_db: (f64, f64),
    pub shape: SegmentShape,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            snr_db: (15.0, 25.0),
            shape: SegmentShape::VEHICLE,
        }
    }
}

/// Raw segment cells with their label, kept so several bin counts can be
/// derived from the same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSample {
    pub cells: Vec<f64>,
    pub label: usize,
    pub snr_db: f64,
    pub center: (usize, usize),
}

/// Strongest cell inside `gt`, moved inward until a full segment fits.
pub fn target_center(map: &RDMap, gt: &BBox, shape: SegmentShape) -> Option<(usize, usize)> {
    let ((rmin, rmax), (dmin, dmax)) = shape.centre_bounds(map.n_range(), map.n_doppler())?;
    let mut best = (gt.r0, gt.d0);
    for r in gt.r0..=gt.r1 {
        for d in gt.d0..=gt.d1 {
            if map.at(r, d) > map.at(best.0, best.1) {
                best = (r, d);
            }
        }
    }
    Some((best.0.clamp(rmin, rmax), best.1.clamp(dmin, dmax)))
}

/// Uniform segment centre whose footprint avoids every box in `avoid`.
pub fn clutter_free_center<R: Rng + ?Sized>(
    rng: &mut R,
    map: &RDMap,
    avoid: &[BBox],
    shape: SegmentShape,
) -> Option<(usize, usize)> {
    let ((rmin, rmax), (dmin, dmax)) = shape.centre_bounds(map.n_range(), map.n_doppler())?;
    for _ in 0..10_000 {
        let c = (rng.random_range(rmin..=rmax), rng.random_range(dmin..=dmax));
        let b = BBox::around(c, shape);
        if avoid.iter().all(|a| b.intersection(a).is_none()) {
            return Some(c);
        }
    }
    None
}

fn one_dwell(spec: &DatasetSpec, seed: u64) -> Result<[SegmentSample; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = Scenario {
        n_targets: 1,
        ..spec.scenario.clone()
    };
    let scene = sample_scene(&mut rng, &scenario)?;
    let snr_db = if spec.snr_db.1 > spec.snr_db.0 {
        rng.random_range(spec.snr_db.0..spec.snr_db.1)
    } else {
        spec.snr_db.0
    };
    let cube = synth_if_cube(&scene, &scenario.radar, NoiseSpec::PeakSnrDb(snr_db), &mut rng)?;
    let map = compute_rd_map(&cube)?;
    let gt = ground_truth(&map.geometry, &scene[0]);
    let no_fit = || Error::InvalidConfig("segment does not fit in the map".into());
    let h1 = target_center(&map, &gt, spec.shape).ok_or_else(no_fit)?;
    let h0 = clutter_free_center(&mut rng, &map, &[gt], spec.shape).ok_or_else(no_fit)?;
    let take = |c: (usize, usize), label: usize| -> Result<SegmentSample> {
        Ok(SegmentSample {
            cells: extract_segment(&map, c, spec.shape)?.into_vec(),
            label,
            snr_db,
            center: c,
        })
    };
    Ok([take(h1, 1)?, take(h0, 0)?])
}

/// `2 * n_dwells` balanced segments from independently seeded dwells.
pub fn generate_segments(spec: &DatasetSpec, n_dwells: usize, seed: u64) -> Result<Vec<SegmentSample>> {
    spec.scenario.validate()?;
    if !(spec.snr_db.1 >= spec.snr_db.0) {
        return Err(Error::InvalidConfig(format!("bad SNR interval {:?}", spec.snr_db)));
    }
    let pairs = (0..n_dwells as u64)
        .into_par_iter()
        .map(|i| one_dwell(spec, derive_seed(seed, &[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

/// Histogram features with `m_bins` bins.
pub fn featurize(samples: &[SegmentSample], m_bins: usize) -> Result<Dataset> {
    let inputs = samples
        .iter()
        .map(|s| histogram_feature(&s.cells, m_bins).map(|h| h.heights))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(inputs, samples.iter().map(|s| s.label).collect())
}

/// One CSV row per segment: `range_bin,doppler_bin,snr_db,label,c0..c{n-1}`
/// with the cells in row-major segment order.
pub fn write_segments_csv<W: Write>(w: W, samples: &[SegmentSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = samples.first().map_or(0, |s| s.cells.len());
    let mut header: Vec<String> = ["range_bin", "doppler_bin", "snr_db", "label"].map(String::from).to_vec();
    header.extend((0..n).map(|k| format!("c{k}")));
    out.write_record(&header)?;
    for s in samples {
        if s.cells.len() != n {
            return Err(Error::dimension(format!("{n} cells"), format!("{} cells", s.cells.len())));
        }
        let mut rec = vec![
            s.center.0.to_string(),
            s.center.1.to_string(),
            s.snr_db.to_string(),
            s.label.to_string(),
        ];
        rec.extend(s.cells.iter().map(|c| c.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_segments_csv<R: Read>(r: R) -> Result<Vec<SegmentSample>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("segment file has no `{name}` column")))
    };
    let (ri, di, si, li) = (col("range_bin")?, col("doppler_bin")?, col("snr_db")?, col("label")?);
    let cells: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('c'))
        .map(|(i, _)| i)
        .collect();
    if cells.is_empty() {
        return Err(Error::Data("segment file has no cell columns".into()));
    }
    let parse = |rec: &csv::StringRecord, i: usize, line: usize| -> Result<f64> {
        rec.get(i)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Format(format!("line {line}: bad value in column {}", &header[i])))
    };
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let label = parse(&rec, li, line)?;
        if label != 0.0 && label != 1.0 {
            return Err(Error::Data(format!("line {line}: label {label} is not 0 or 1")));
        }
        out.push(SegmentSample {
            cells: cells.iter().map(|&i| parse(&rec, i, line)).collect::<Result<_>>()?,
            label: label as usize,
            snr_db: parse(&rec, si, line)?,
            center: (parse(&rec, ri, line)? as usize, parse(&rec, di, line)? as usize),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_reproducible() {
        let spec = DatasetSpec::default();
        let a = generate_segments(&spec, 6, 3).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.iter().filter(|s| s.label == 1).count(), 6);
        assert!(a.iter().all(|s| s.cells.len() == 119));
        assert!(a.iter().all(|s| (15.0..25.0).contains(&s.snr_db)));
        assert_eq!(a, generate_segments(&spec, 6, 3).unwrap());
        let d = featurize(&a, 10).unwrap();
        assert_eq!(d.arity(), 10);
        // target segments concentrate their mass in the first bin
        let mean = |label| {
            let v: Vec<f64> = d.inputs.iter().zip(&d.labels).filter(|(_, &l)| l == label).map(|(x, _)| x[0]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(1) > mean(0) + 0.2);
    }

    #[test]
    fn segments_csv_round_trip() {
        let a = generate_segments(&DatasetSpec::default(), 3, 9).unwrap();
        let mut buf = Vec::new();
        write_segments_csv(&mut buf, &a).unwrap();
        assert_eq!(read_segments_csv(&buf[..]).unwrap(), a);
        let no_label = "range_bin,doppler_bin,snr_db,c0,c1\n1,2,3,0.5,0.25\n";
        assert!(matches!(read_segments_csv(no_label.as_bytes()), Err(Error::Data(_))));
        let bad = "range_bin,doppler_bin,snr_db,label,c0\n1,2,3,2,0.5\n";
        assert!(read_segments_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn target_center_picks_peak_inside_box() {
        use crate::grid::Grid;
        let cfg = crate::sim::RadarConfig::mrr_77ghz();
        let mut g = Grid::zeros(256, 128);
        g[(40, 60)] = 5.0;
        g[(2, 1)] = 9.0;
        g[(100, 64)] = 50.0;
        let map = RDMap::from_power(g, cfg.geometry().unwrap()).unwrap();
        let gt = BBox { r0: 35, r1: 45, d0: 58, d1: 62 };
        assert_eq!(target_center(&map, &gt, SegmentShape::VEHICLE), Some((40, 60)));
        let edge = BBox { r0: 0, r1: 4, d0: 0, d1: 3 };
        assert_eq!(target_center(&map, &edge, SegmentShape::VEHICLE), Some((8, 3)));
    }
}
