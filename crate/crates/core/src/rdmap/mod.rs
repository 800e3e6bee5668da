//! Square-law Range-Doppler maps and the per-segment histogram features fed
//! to the detector.

mod histogram;
pub mod io;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use histogram::{histogram_feature, segment_histogram, Histogram, SegmentFeature};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sim::{IfDataCube, MapGeometry};

/// Taper applied along both FFT axes. Off by default: a window changes the
/// noise-cell distribution the detector is trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Option<Vec<f64>> {
        match self {
            Window::None => None,
            Window::Hann => Some(
                (0..n)
                    .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                    .collect(),
            ),
        }
    }
}

/// `N x L` grid of square-law power, rows = range bins, columns = Doppler
/// bins (zero velocity at column `L/2` when `doppler_centered`).
#[derive(Debug, Clone, PartialEq)]
pub struct RDMap {
    pub power: Grid<f64>,
    pub geometry: MapGeometry,
    pub doppler_centered: bool,
}

impl RDMap {
    /// Wraps an existing power grid; negative or non-finite cells are
    /// rejected.
    pub fn from_power(power: Grid<f64>, geometry: MapGeometry) -> Result<Self> {
        if power.shape() != (geometry.n_range_bins, geometry.n_doppler_bins) {
            return Err(Error::Dimension {
                expected: format!("{}x{}", geometry.n_range_bins, geometry.n_doppler_bins),
                got: format!("{}x{}", power.rows(), power.cols()),
            });
        }
        if power.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("RD map cells must be finite and >= 0".into()));
        }
        Ok(Self {
            power,
            geometry,
            doppler_centered: true,
        })
    }

    pub fn n_range(&self) -> usize {
        self.power.rows()
    }

    pub fn n_doppler(&self) -> usize {
        self.power.cols()
    }

    #[inline]
    pub fn at(&self, range_bin: usize, doppler_bin: usize) -> f64 {
        self.power[(range_bin, doppler_bin)]
    }

    /// Same map with every cell multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            power: self.power.map(|v| v * factor),
            ..self.clone()
        }
    }
}

/// Fixed odd-by-odd RD segment footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentShape {
    pub range_cells: usize,
    pub doppler_cells: usize,
}

impl Default for SegmentShape {
    fn default() -> Self {
        Self::VEHICLE
    }
}

impl SegmentShape {
    /// 17 x 7 cells, about 6 m by 2 m/s on the MRR geometry.
    pub const VEHICLE: SegmentShape = SegmentShape {
        range_cells: 17,
        doppler_cells: 7,
    };

    pub fn new(range_cells: usize, doppler_cells: usize) -> Result<Self> {
        if range_cells % 2 == 0 || doppler_cells % 2 == 0 || range_cells == 0 || doppler_cells == 0
        {
            return Err(Error::InvalidArgument(format!(
                "segment must be odd x odd, got {range_cells}x{doppler_cells}"
            )));
        }
        Ok(Self {
            range_cells,
            doppler_cells,
        })
    }

    pub fn half_range(&self) -> usize {
        self.range_cells / 2
    }

    pub fn half_doppler(&self) -> usize {
        self.doppler_cells / 2
    }

    pub fn n_cells(&self) -> usize {
        self.range_cells * self.doppler_cells
    }

    /// Whether a segment centred at `(r, d)` lies fully inside a
    /// `rows x cols` map.
    pub fn fits(&self, rows: usize, cols: usize, r: usize, d: usize) -> bool {
        r >= self.half_range()
            && d >= self.half_doppler()
            && r + self.half_range() < rows
            && d + self.half_doppler() < cols
    }

    /// Inclusive ranges of valid centre rows and columns, or `None` if the map
    /// is smaller than one segment.
    pub fn centre_bounds(&self, rows: usize, cols: usize) -> Option<((usize, usize), (usize, usize))> {
        if rows < self.range_cells || cols < self.doppler_cells {
            return None;
        }
        Some((
            (self.half_range(), rows - 1 - self.half_range()),
            (self.half_doppler(), cols - 1 - self.half_doppler()),
        ))
    }
}

/// Unnormalized 2-D DFT (fast time, then slow time) followed by `|.|^2`,
/// optionally FFT-shifted along Doppler.
pub fn fft2_power(samples: &Grid<Complex64>, centered: bool) -> Grid<f64> {
    fft2_power_windowed(samples, centered, Window::None)
}

fn fft2_power_windowed(samples: &Grid<Complex64>, centered: bool, window: Window) -> Grid<f64> {
    let (n, l) = samples.shape();
    let mut planner = FftPlanner::<f64>::new();
    let fft_n = planner.plan_fft_forward(n);
    let fft_l = planner.plan_fft_forward(l);
    let w_n = window.coefficients(n);
    let w_l = window.coefficients(l);

    // Transpose so each chirp's fast-time samples are contiguous.
    let mut t = vec![Complex64::default(); n * l];
    for i in 0..n {
        let wi = w_n.as_ref().map_or(1.0, |w| w[i]);
        for (j, z) in samples.row(i).iter().enumerate() {
            t[j * n + i] = z * wi;
        }
    }
    fft_n.process(&mut t);

    let mut rd = vec![Complex64::default(); n * l];
    for j in 0..l {
        let wj = w_l.as_ref().map_or(1.0, |w| w[j]);
        for i in 0..n {
            rd[i * l + j] = t[j * n + i] * wj;
        }
    }
    fft_l.process(&mut rd);

    let half = l / 2;
    let mut out = vec![0.0; n * l];
    for i in 0..n {
        let src = &rd[i * l..(i + 1) * l];
        let dst = &mut out[i * l..(i + 1) * l];
        for (j, z) in src.iter().enumerate() {
            let k = if centered { (j + half) % l } else { j };
            dst[k] = z.norm_sqr();
        }
    }
    Grid::from_vec(n, l, out)
}

/// Builds the Doppler-centred square-law RD map of a cube, no windowing.
pub fn compute_rd_map(cube: &IfDataCube) -> Result<RDMap> {
    compute_rd_map_with(cube, Window::None)
}

pub fn compute_rd_map_with(cube: &IfDataCube, window: Window) -> Result<RDMap> {
    let geometry = cube.config.geometry()?;
    if cube.samples.shape() != (cube.config.n_samples, cube.config.n_chirps) {
        return Err(Error::Dimension {
            expected: format!("{}x{}", cube.config.n_samples, cube.config.n_chirps),
            got: format!("{}x{}", cube.samples.rows(), cube.samples.cols()),
        });
    }
    Ok(RDMap {
        power: fft2_power_windowed(&cube.samples, true, window),
        geometry,
        doppler_centered: true,
    })
}

/// Copies the segment centred at `center = (range_bin, doppler_bin)`
/// row-major into a `range_cells x doppler_cells` grid.
pub fn extract_segment(map: &RDMap, center: (usize, usize), shape: SegmentShape) -> Result<Grid<f64>> {
    let (r, d) = center;
    if !shape.fits(map.n_range(), map.n_doppler(), r, d) {
        return Err(Error::SegmentOutOfBounds {
            range_bin: r,
            doppler_bin: d,
        });
    }
    let (hr, hd) = (shape.half_range(), shape.half_doppler());
    let mut cells = Vec::with_capacity(shape.n_cells());
    for row in r - hr..=r + hr {
        cells.extend_from_slice(&map.power.row(row)[d - hd..=d + hd]);
    }
    Ok(Grid::from_vec(shape.range_cells, shape.doppler_cells, cells))
}
