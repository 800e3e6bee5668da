//! FMCW scene synthesis: extended Swerling-3 targets rendered directly as
//! complex IF tones plus circular Gaussian noise.

mod config;
mod cube;
pub mod io;
mod target;

pub use config::{MapGeometry, RadarConfig, SPEED_OF_LIGHT};
pub use cube::{
    add_noise, beat_frequency, doppler_frequency, sigma_for_peak_snr, synth_clean, synth_if_cube,
    IfDataCube, NoiseSpec,
};
pub use target::{
    sample_target, sample_target_with, Aspect, ExtendedTarget, Scatterer, TargetModel, LINK_GAIN,
};

/// Derives map geometry from a configuration.
pub fn derive_geometry(config: &RadarConfig) -> crate::Result<MapGeometry> {
    config.geometry()
}
