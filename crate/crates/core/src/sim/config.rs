use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used for every range/Doppler conversion.
///
/// The MRR figures (0.3516 m, 0.3044 m/s, 426.68 MHz) are reproduced with the
/// rounded value, so it is used throughout rather than the exact SI constant.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// FMCW waveform parameters for one dwell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Carrier frequency (Hz).
    pub f0: f64,
    /// Chirp slope (Hz/s).
    pub slope: f64,
    /// Chirp repetition interval (s).
    pub t_cri: f64,
    /// ADC sample rate (Hz).
    pub fs: f64,
    /// Fast-time samples per chirp.
    pub n_samples: usize,
    /// Chirps per dwell.
    pub n_chirps: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self::mrr_77ghz()
    }
}

impl RadarConfig {
    /// 77 GHz medium-range radar: 16.67 MHz/us slope, 50 us CRI, 10 MHz ADC,
    /// 256 samples x 128 chirps.
    pub fn mrr_77ghz() -> Self {
        Self {
            f0: 77.0e9,
            slope: 16.67e12,
            t_cri: 50.0e-6,
            fs: 10.0e6,
            n_samples: 256,
            n_chirps: 128,
        }
    }

    /// Swept bandwidth covered by the sampled part of the chirp.
    pub fn bandwidth(&self) -> f64 {
        self.slope * self.n_samples as f64 / self.fs
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f0", self.f0),
            ("slope", self.slope),
            ("t_cri", self.t_cri),
            ("fs", self.fs),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        for (name, n) in [("n_samples", self.n_samples), ("n_chirps", self.n_chirps)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a power of two >= 2, got {n}"
                )));
            }
        }
        let chirp = self.n_samples as f64 / self.fs;
        if chirp > self.t_cri {
            return Err(Error::InvalidConfig(format!(
                "sampling window {chirp:.3e} s exceeds chirp repetition interval {:.3e} s",
                self.t_cri
            )));
        }
        Ok(())
    }

    /// Derives resolutions and unambiguous spans of the RD map.
    pub fn geometry(&self) -> Result<MapGeometry> {
        self.validate()?;
        let n = self.n_samples as f64;
        let l = self.n_chirps as f64;
        let range_resolution = SPEED_OF_LIGHT * (self.fs / n) / (2.0 * self.slope);
        let velocity_resolution = self.wavelength() / (2.0 * l * self.t_cri);
        Ok(MapGeometry {
            n_range_bins: self.n_samples,
            n_doppler_bins: self.n_chirps,
            range_resolution,
            velocity_resolution,
            // Complex IF sampling: beat frequencies in [0, fs) are unambiguous.
            max_range: range_resolution * n,
            max_velocity: velocity_resolution * l / 2.0,
            bandwidth: self.bandwidth(),
        })
    }
}

/// Axis metadata of a Doppler-centred RD map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub n_range_bins: usize,
    pub n_doppler_bins: usize,
    pub range_resolution: f64,
    pub velocity_resolution: f64,
    pub max_range: f64,
    /// Velocities in `[-max_velocity, max_velocity)` are unambiguous.
    pub max_velocity: f64,
    pub bandwidth: f64,
}

impl MapGeometry {
    /// Index of the zero-velocity column.
    pub fn zero_doppler_bin(&self) -> usize {
        self.n_doppler_bins / 2
    }

    pub fn range_of_bin(&self, bin: f64) -> f64 {
        bin * self.range_resolution
    }

    pub fn velocity_of_bin(&self, bin: f64) -> f64 {
        (bin - self.zero_doppler_bin() as f64) * self.velocity_resolution
    }

    /// Fractional range bin of a range in metres.
    pub fn range_bin(&self, range_m: f64) -> f64 {
        range_m / self.range_resolution
    }

    /// Fractional (centred) Doppler bin of a radial velocity.
    pub fn doppler_bin(&self, velocity_mps: f64) -> f64 {
        velocity_mps / self.velocity_resolution + self.zero_doppler_bin() as f64
    }

    /// Extent of a `range_cells x doppler_cells` block in metres and m/s.
    pub fn segment_span(&self, range_cells: usize, doppler_cells: usize) -> (f64, f64) {
        (
            range_cells as f64 * self.range_resolution,
            doppler_cells as f64 * self.velocity_resolution,
        )
    }
}
