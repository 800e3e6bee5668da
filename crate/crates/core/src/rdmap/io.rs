//! RD map export (float32 grid + JSON sidecar) and histogram CSV dumps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RDMap, SegmentFeature};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sim::MapGeometry;

/// Sidecar describing a `.f32` RD map dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub layout: String,
    pub doppler_centered: bool,
    pub geometry: MapGeometry,
    /// Range in metres of every row.
    pub range_axis_m: Vec<f64>,
    /// Radial velocity in m/s of every column.
    pub velocity_axis_mps: Vec<f64>,
}

impl MapSidecar {
    pub fn for_map(map: &RDMap) -> Self {
        let g = map.geometry;
        Self {
            rows: map.n_range(),
            cols: map.n_doppler(),
            dtype: "float32-le".into(),
            layout: "row-major (range, doppler)".into(),
            doppler_centered: map.doppler_centered,
            geometry: g,
            range_axis_m: (0..map.n_range()).map(|r| g.range_of_bin(r as f64)).collect(),
            velocity_axis_mps: (0..map.n_doppler())
                .map(|d| g.velocity_of_bin(d as f64))
                .collect(),
        }
    }
}

/// Writes `<stem>.f32` and `<stem>.json`.
pub fn write_map(dir: &Path, stem: &str, map: &RDMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.f32")))?);
    for v in map.power.as_slice() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    let side = MapSidecar::for_map(map);
    serde_json::to_writer_pretty(File::create(dir.join(format!("{stem}.json")))?, &side)?;
    Ok(())
}

pub fn read_map(dir: &Path, stem: &str) -> Result<RDMap> {
    let side: MapSidecar =
        serde_json::from_reader(BufReader::new(File::open(dir.join(format!("{stem}.json")))?))?;
    let mut bytes = Vec::new();
    File::open(dir.join(format!("{stem}.f32")))?.read_to_end(&mut bytes)?;
    if bytes.len() != side.rows * side.cols * 4 {
        return Err(Error::Format(format!(
            "map body has {} bytes, sidecar says {}x{} float32",
            bytes.len(),
            side.rows,
            side.cols
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let mut map = RDMap::from_power(Grid::from_vec(side.rows, side.cols, data), side.geometry)?;
    map.doppler_centered = side.doppler_centered;
    Ok(map)
}

/// One CSV row per segment: `range_bin,doppler_bin,x0..x{M-1},label`.
pub fn write_histogram_csv<W: Write>(w: W, rows: &[(SegmentFeature, u8)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let m = rows.first().map_or(0, |(f, _)| f.m_bins());
    let mut header = vec!["range_bin".to_string(), "doppler_bin".to_string()];
    header.extend((0..m).map(|k| format!("x{k}")));
    header.push("label".into());
    out.write_record(&header)?;
    for (f, label) in rows {
        if f.m_bins() != m {
            return Err(Error::Dimension {
                expected: format!("{m} bins"),
                got: format!("{} bins", f.m_bins()),
            });
        }
        let mut rec = vec![f.center.0.to_string(), f.center.1.to_string()];
        rec.extend(f.histogram.heights.iter().map(|x| format!("{x}")));
        rec.push(label.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdmap::histogram_feature;
    use crate::sim::RadarConfig;

    #[test]
    fn map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = RadarConfig::mrr_77ghz().geometry().unwrap();
        let power = Grid::from_vec(256, 128, (0..256 * 128).map(|v| (v % 97) as f64 * 0.5).collect());
        let map = RDMap::from_power(power, g).unwrap();
        write_map(dir.path(), "rd", &map).unwrap();
        let back = read_map(dir.path(), "rd").unwrap();
        assert_eq!(back, map);
        let side: MapSidecar =
            serde_json::from_reader(File::open(dir.path().join("rd.json")).unwrap()).unwrap();
        assert_eq!(side.velocity_axis_mps[64], 0.0);
        assert_eq!(side.range_axis_m.len(), 256);
    }

    #[test]
    fn histogram_csv_layout() {
        let h = histogram_feature(&[0.0, 0.0, 1.0, 0.5], 5).unwrap();
        let f = SegmentFeature {
            center: (10, 20),
            cells: vec![],
            histogram: h,
        };
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &[(f, 1)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "range_bin,doppler_bin,x0,x1,x2,x3,x4,label");
        assert_eq!(lines.next().unwrap(), "10,20,0.5,0,0.25,0,0.25,1");
    }
}
