use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{RadarConfig, SPEED_OF_LIGHT};
use super::target::ExtendedTarget;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rdmap::fft2_power;

/// Down-converted IF samples of one dwell: `n_samples` rows (fast time) by
/// `n_chirps` columns (slow time).
#[derive(Debug, Clone, PartialEq)]
pub struct IfDataCube {
    pub samples: Grid<Complex64>,
    pub config: RadarConfig,
    /// Per-sample standard deviation of the complex noise, `CN(0, sigma^2)`.
    pub noise_sigma: f64,
}

/// How the additive noise level of a synthesized cube is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Fixed per-sample standard deviation.
    Sigma(f64),
    /// Peak noise-free RD cell over mean noise RD cell, in dB. For an empty
    /// scene there is no reference and sigma falls back to 1.
    PeakSnrDb(f64),
}

/// Beat frequency of a reflector at `range_m`.
pub fn beat_frequency(config: &RadarConfig, range_m: f64) -> f64 {
    2.0 * config.slope * range_m / SPEED_OF_LIGHT
}

/// Doppler frequency of a reflector closing at `velocity_mps`.
pub fn doppler_frequency(config: &RadarConfig, velocity_mps: f64) -> f64 {
    2.0 * velocity_mps * config.f0 / SPEED_OF_LIGHT
}

fn check_unambiguous(config: &RadarConfig, scene: &[ExtendedTarget]) -> Result<()> {
    let geom = config.geometry()?;
    for (k, t) in scene.iter().enumerate() {
        let (r_lo, r_hi) = t.range_span();
        if r_lo < 0.0 || r_hi >= geom.max_range {
            return Err(Error::Aliasing(format!(
                "target {k} occupies [{r_lo:.2}, {r_hi:.2}] m, unambiguous range is [0, {:.2})",
                geom.max_range
            )));
        }
        let (v_lo, v_hi) = t.velocity_span();
        if v_lo < -geom.max_velocity || v_hi >= geom.max_velocity {
            return Err(Error::Aliasing(format!(
                "target {k} occupies [{v_lo:.2}, {v_hi:.2}] m/s, unambiguous window is +/-{:.2}",
                geom.max_velocity
            )));
        }
    }
    Ok(())
}

/// Noise-free IF samples: every scatterer adds one complex 2-D tone.
pub fn synth_clean(scene: &[ExtendedTarget], config: &RadarConfig) -> Result<Grid<Complex64>> {
    check_unambiguous(config, scene)?;
    let (n, l) = (config.n_samples, config.n_chirps);
    let mut z = Grid::<Complex64>::zeros(n, l);
    let mut fast = vec![Complex64::default(); n];
    let mut slow = vec![Complex64::default(); l];
    for target in scene {
        for s in &target.scatterers {
            let f_r = beat_frequency(config, target.range_m + s.delta_r);
            let f_d = doppler_frequency(config, target.velocity_mps + s.delta_v);
            let amp = Complex64::from_polar(s.amplitude, target.phase + s.phase);
            for (i, v) in fast.iter_mut().enumerate() {
                *v = Complex64::from_polar(1.0, TAU * f_r * i as f64 / config.fs);
            }
            for (j, v) in slow.iter_mut().enumerate() {
                *v = amp * Complex64::from_polar(1.0, TAU * f_d * j as f64 * config.t_cri);
            }
            let data = z.as_mut_slice();
            for (i, a) in fast.iter().enumerate() {
                let row = &mut data[i * l..(i + 1) * l];
                for (cell, b) in row.iter_mut().zip(&slow) {
                    *cell += a * b;
                }
            }
        }
    }
    Ok(z)
}

/// Synthesizes the IF data cube of a scene plus circular complex Gaussian
/// noise.
pub fn synth_if_cube<R: Rng + ?Sized>(
    scene: &[ExtendedTarget],
    config: &RadarConfig,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<IfDataCube> {
    let mut samples = synth_clean(scene, config)?;
    let sigma = match noise {
        NoiseSpec::Sigma(s) => {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("noise sigma {s}")));
            }
            s
        }
        NoiseSpec::PeakSnrDb(_) if scene.is_empty() => 1.0,
        NoiseSpec::PeakSnrDb(snr_db) => {
            let clean = fft2_power(&samples, false);
            let peak = clean.as_slice().iter().cloned().fold(0.0, f64::max);
            sigma_for_peak_snr(config, peak, snr_db)
        }
    };
    add_noise(&mut samples, sigma, rng);
    Ok(IfDataCube {
        samples,
        config: *config,
        noise_sigma: sigma,
    })
}

/// Noise sigma that puts a noise-free RD peak `peak_power` at `snr_db` above
/// the mean noise cell. An unnormalized N x L DFT of `CN(0, sigma^2)` samples
/// has mean cell power `sigma^2 N L`.
pub fn sigma_for_peak_snr(config: &RadarConfig, peak_power: f64, snr_db: f64) -> f64 {
    let gain = (config.n_samples * config.n_chirps) as f64;
    (peak_power / (10f64.powf(snr_db / 10.0) * gain)).sqrt()
}

pub fn add_noise<R: Rng + ?Sized>(samples: &mut Grid<Complex64>, sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    let s = sigma / std::f64::consts::SQRT_2;
    for v in samples.as_mut_slice() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re * s, im * s);
    }
}
