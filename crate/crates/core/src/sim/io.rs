//! Little-endian complex-float32 cube files with a fixed 64-byte header.
//!
//! Header layout (all little-endian):
//!
//! | offset | type    | field                     |
//! |--------|---------|---------------------------|
//! | 0      | [u8; 8] | magic `KANRDCUB`          |
//! | 8      | u32     | N (fast-time samples)     |
//! | 12     | u32     | L (chirps)                |
//! | 16     | f64     | fs                        |
//! | 24     | f64     | slope                     |
//! | 32     | f64     | t_cri                     |
//! | 40     | f64     | f0                        |
//! | 48     | f64     | noise sigma               |
//! | 56     | [u8; 8] | reserved, zero            |
//!
//! followed by N*L `(re: f32, im: f32)` pairs, row-major with the chirp index
//! varying fastest.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::config::RadarConfig;
use super::cube::IfDataCube;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const CUBE_MAGIC: &[u8; 8] = b"KANRDCUB";
pub const CUBE_HEADER_LEN: usize = 64;

pub fn write_cube<W: Write>(mut w: W, cube: &IfDataCube) -> Result<()> {
    let c = &cube.config;
    let (n, l) = cube.samples.shape();
    let mut header = [0u8; CUBE_HEADER_LEN];
    header[..8].copy_from_slice(CUBE_MAGIC);
    header[8..12].copy_from_slice(&(n as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(l as u32).to_le_bytes());
    for (i, v) in [c.fs, c.slope, c.t_cri, c.f0, cube.noise_sigma].iter().enumerate() {
        header[16 + 8 * i..24 + 8 * i].copy_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(n * l * 8);
    for z in cube.samples.as_slice() {
        body.extend_from_slice(&(z.re as f32).to_le_bytes());
        body.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    w.write_all(&body)?;
    Ok(())
}

pub fn read_cube<R: Read>(mut r: R) -> Result<IfDataCube> {
    let mut header = [0u8; CUBE_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..8] != CUBE_MAGIC {
        return Err(Error::Format("bad cube magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let (n, l) = (u32_at(8), u32_at(12));
    let config = RadarConfig {
        fs: f64_at(16),
        slope: f64_at(24),
        t_cri: f64_at(32),
        f0: f64_at(40),
        n_samples: n,
        n_chirps: l,
    };
    config.validate()?;
    let sigma = f64_at(48);
    let mut body = vec![0u8; n * l * 8];
    r.read_exact(&mut body)?;
    let data = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(IfDataCube {
        samples: Grid::from_vec(n, l, data),
        config,
        noise_sigma: sigma,
    })
}
