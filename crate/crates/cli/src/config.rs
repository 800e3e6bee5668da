use std::path::{Path, PathBuf};

use kanrd::eval::{DatasetSpec, Scenario};
use kanrd::kan::{PruneOptions, TrainOptions};
use kanrd::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

/// Everything a run needs; a run is reproducible from this plus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Radar, target model and placement.
    pub scenario: Scenario,
    pub simulate: SimulateConfig,
    pub train: TrainConfig,
    /// Detector roster: built-in rule names, `oscfar@<pfa>`, `kan:<model.json>`
    /// or `rule:<rule.json>`.
    pub detectors: Vec<String>,
    pub pipeline: PipelineConfig,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub keep_trials: bool,
    /// Dwells of labelled segments used for accuracy rows, decay rates and
    /// statistic dumps during `eval`; 0 skips them.
    pub eval_dwells: usize,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            scenario: Scenario::default(),
            simulate: SimulateConfig::default(),
            train: TrainConfig::default(),
            detectors: vec![
                "paper-eq7-m10".into(),
                "oscfar@1e-3".into(),
                "oscfar@1e-4".into(),
                "oscfar@1e-5".into(),
                "oscfar@1e-6".into(),
            ],
            pipeline: PipelineConfig::default(),
            snr_grid: (-5..=5).map(|k| 5.0 * k as f64).collect(),
            trials: 350,
            keep_trials: false,
            eval_dwells: 200,
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub dwells: usize,
    /// Peak SNR of every dwell (dB).
    pub snr_db: f64,
    /// Dwells of labelled segments written to `segments.csv`; 0 skips it.
    pub segment_dwells: usize,
    pub write_cubes: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            dwells: 4,
            snr_db: 20.0,
            segment_dwells: 0,
            write_cubes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub m_bins: usize,
    /// Dwells simulated when no dataset directory is given.
    pub dwells: usize,
    /// Peak SNR interval of simulated training dwells (dB).
    pub snr_db: (f64, f64),
    pub test_fraction: f64,
    pub options: TrainOptions,
    pub prune: PruneOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m_bins: 10,
            dwells: 13_118,
            snr_db: DatasetSpec::default().snr_db,
            test_fraction: 0.2,
            options: TrainOptions::default(),
            prune: PruneOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn dataset_spec(&self, scenario: &Scenario) -> DatasetSpec {
        DatasetSpec {
            scenario: scenario.clone(),
            snr_db: self.snr_db,
            ..DatasetSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `(range bins, Doppler bins)` map sizes.
    pub sizes: Vec<(usize, usize)>,
    /// OS-CFAR reference windows `(range cells, Doppler cells)` for the
    /// `N_ref` sweep.
    pub windows: Vec<(usize, usize)>,
    pub repeats: usize,
    pub detector: String,
    pub oscfar_pfa: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![(128, 128), (256, 128), (512, 128), (1024, 128)],
            windows: vec![(9, 5), (13, 5), (17, 7), (21, 9), (25, 11), (33, 13)],
            repeats: 3,
            detector: "paper-eq7-m10".into(),
            oscfar_pfa: 1e-4,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
