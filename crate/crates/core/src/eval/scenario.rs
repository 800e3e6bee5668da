use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pipeline::BBox;
use crate::sim::{sample_target_with, Aspect, ExtendedTarget, MapGeometry, RadarConfig, TargetModel};
use crate::{Error, Result};

/// Where and how targets are placed in each simulated dwell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub radar: RadarConfig,
    pub target_model: TargetModel,
    /// Aspects drawn uniformly per target.
    pub aspects: Vec<Aspect>,
    pub n_targets: usize,
    /// Uniform range interval for target centres (m).
    pub range_m: (f64, f64),
    /// Uniform radial-velocity interval for target centres (m/s).
    pub velocity_mps: (f64, f64),
    /// Minimum centre-to-centre range separation between targets (m).
    pub min_separation_m: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            radar: RadarConfig::mrr_77ghz(),
            target_model: TargetModel::default(),
            aspects: Aspect::ALL.to_vec(),
            n_targets: 1,
            range_m: (10.0, 80.0),
            velocity_mps: (-15.0, 15.0),
            min_separation_m: 12.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        let g = self.radar.geometry()?;
        let (r0, r1) = self.range_m;
        let (v0, v1) = self.velocity_mps;
        if !(r0 > 0.0 && r1 >= r0 && r1 < g.max_range) {
            return Err(Error::InvalidConfig(format!(
                "range interval [{r0}, {r1}] must lie in (0, {:.2}) m",
                g.max_range
            )));
        }
        if !(v1 >= v0 && v0 > -g.max_velocity && v1 < g.max_velocity) {
            return Err(Error::InvalidConfig(format!(
                "velocity interval [{v0}, {v1}] must lie in +/-{:.2} m/s",
                g.max_velocity
            )));
        }
        if self.n_targets > 0 && self.aspects.is_empty() {
            return Err(Error::InvalidConfig("no aspects to draw from".into()));
        }
        if self.n_targets > 1 && (r1 - r0) < self.min_separation_m * (self.n_targets - 1) as f64 {
            return Err(Error::InvalidConfig(format!(
                "cannot fit {} targets {} m apart in [{r0}, {r1}] m",
                self.n_targets, self.min_separation_m
            )));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `n_targets` extended targets, separated in range by at least
/// `min_separation_m`.
pub fn sample_scene<R: Rng + ?Sized>(rng: &mut R, scenario: &Scenario) -> Result<Vec<ExtendedTarget>> {
    scenario.validate()?;
    let mut ranges: Vec<f64> = Vec::with_capacity(scenario.n_targets);
    let mut attempts = 0;
    while ranges.len() < scenario.n_targets {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidConfig("could not place separated targets".into()));
        }
        let r = uniform(rng, scenario.range_m);
        if ranges.iter().all(|&q| (q - r).abs() >= scenario.min_separation_m) {
            ranges.push(r);
        }
    }
    ranges
        .into_iter()
        .map(|r| {
            let v = uniform(rng, scenario.velocity_mps);
            let aspect = scenario.aspects[rng.random_range(0..scenario.aspects.len())];
            sample_target_with(rng, &scenario.radar, &scenario.target_model, r, v, aspect)
        })
        .collect()
}

/// Bounding box of the bins nearest to every scatterer of `target`, grown by
/// one bin on each side and clipped to the map.
pub fn ground_truth(geometry: &MapGeometry, target: &ExtendedTarget) -> BBox {
    let nr = geometry.n_range_bins as f64;
    let nd = geometry.n_doppler_bins as f64;
    let (mut r0, mut r1, mut d0, mut d1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in &target.scatterers {
        let r = geometry.range_bin(target.range_m + s.delta_r).round();
        let d = geometry.doppler_bin(target.velocity_mps + s.delta_v).round();
        r0 = r0.min(r);
        r1 = r1.max(r);
        d0 = d0.min(d);
        d1 = d1.max(d);
    }
    if target.scatterers.is_empty() {
        r0 = geometry.range_bin(target.range_m).round();
        r1 = r0;
        d0 = geometry.doppler_bin(target.velocity_mps).round();
        d1 = d0;
    }
    let clip = |v: f64, n: f64| v.clamp(0.0, n - 1.0) as usize;
    BBox {
        r0: clip(r0 - 1.0, nr),
        r1: clip(r1 + 1.0, nr),
        d0: clip(d0 - 1.0, nd),
        d1: clip(d1 + 1.0, nd),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scatterer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scene_respects_separation() {
        let sc = Scenario {
            n_targets: 3,
            ..Scenario::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let scene = sample_scene(&mut rng, &sc).unwrap();
            assert_eq!(scene.len(), 3);
            for i in 0..3 {
                for j in i + 1..3 {
                    assert!((scene[i].range_m - scene[j].range_m).abs() >= 12.0);
                }
            }
        }
        let crowded = Scenario {
            n_targets: 8,
            ..Scenario::default()
        };
        assert!(sample_scene(&mut rng, &crowded).is_err());
        let far = Scenario {
            range_m: (10.0, 95.0),
            ..Scenario::default()
        };
        assert!(far.validate().is_err());
    }

    #[test]
    fn ground_truth_box_from_scatterers() {
        let g = RadarConfig::mrr_77ghz().geometry().unwrap();
        let rr = g.range_resolution;
        let vr = g.velocity_resolution;
        let mut t = crate::sim::sample_target(&mut ChaCha8Rng::seed_from_u64(1), &RadarConfig::mrr_77ghz(), 30.0 * rr, 0.0, Aspect::Rear).unwrap();
        t.velocity_mps = 0.0;
        t.scatterers = vec![
            Scatterer {
                delta_r: -2.2 * rr,
                delta_v: 0.0,
                amplitude: 1.0,
                phase: 0.0,
            },
            Scatterer {
                delta_r: 4.4 * rr,
                delta_v: 1.1 * vr,
                amplitude: 1.0,
                phase: 0.0,
            },
        ];
        let b = ground_truth(&g, &t);
        assert_eq!(b, BBox { r0: 27, r1: 35, d0: 63, d1: 66 });
    }
}
