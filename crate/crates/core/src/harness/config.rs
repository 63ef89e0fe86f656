//! Run configuration: one structured file drives every pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LidarScanConfig, VoxelGridSpec};
use crate::neuralnet::{RmspropParams, TrainSchedule};
use crate::phy::{UpaConfig, DEFAULT_NOISE_POWER_W, DEFAULT_TX_POWER_W};
use crate::raytrace::TraceConfig;
use crate::scene::{layout_from_params, LayoutParams, SceneLayout};

/// Which feature the dataset carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Panoramic,
    Lidar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudSection {
    /// Surface sampling density, points per square meter.
    pub density: f64,
    /// Reconstruction-noise standard deviation, meters.
    pub noise_sigma: f64,
}

impl Default for CloudSection {
    fn default() -> Self {
        Self {
            density: 1.0,
            noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArraySection {
    pub bs: UpaConfig,
    pub ms: UpaConfig,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            bs: UpaConfig::default(),
            ms: UpaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookSection {
    pub n_beams: usize,
    /// Fixed beam elevation, degrees from +z.
    pub elevation_deg: f64,
}

impl Default for CodebookSection {
    fn default() -> Self {
        Self {
            n_beams: 30,
            elevation_deg: 95.0,
        }
    }
}

impl CodebookSection {
    pub fn elevation_rad(&self) -> f64 {
        self.elevation_deg.to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSection {
    /// Observational distance, meters.
    pub range_m: f64,
    pub azimuth_step_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub elevation_step_deg: f64,
    /// MS-centered feature grid.
    pub grid: VoxelGridSpec<f64>,
}

impl Default for LidarSection {
    fn default() -> Self {
        Self {
            range_m: 200.0,
            azimuth_step_deg: 0.2,
            elevation_min_deg: -15.0,
            elevation_max_deg: 15.0,
            elevation_step_deg: 2.0,
            grid: VoxelGridSpec::default_lidar_local(),
        }
    }
}

impl LidarSection {
    pub fn scan_config(&self, range_m: f64) -> LidarScanConfig<f64> {
        LidarScanConfig {
            range: range_m,
            azimuth_step: self.azimuth_step_deg.to_radians(),
            elevation_min: self.elevation_min_deg.to_radians(),
            elevation_max: self.elevation_max_deg.to_radians(),
            elevation_step: self.elevation_step_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkSection {
    pub tx_power_w: f64,
    pub noise_power_w: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            tx_power_w: DEFAULT_TX_POWER_W,
            noise_power_w: DEFAULT_NOISE_POWER_W,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 50,
            seed: 1,
        }
    }
}

impl ModelSection {
    pub fn optimizer(&self) -> RmspropParams<f64> {
        RmspropParams {
            learning_rate: self.learning_rate,
            decay: self.decay,
            epsilon: self.epsilon,
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Top-M sizes reported by evaluation.
    pub m_values: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            m_values: vec![1, 5, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    /// Training-set fractions swept by the accuracy-vs-data experiment.
    pub fractions: Vec<f64>,
    /// LIDAR observational distances swept by the baseline comparison.
    pub lidar_ranges_m: Vec<f64>,
    /// Write dataset directories next to the reports (off keeps everything
    /// in memory, useful for large sweeps on small disks).
    pub persist_datasets: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            fractions: vec![0.25, 0.5, 1.0],
            lidar_ranges_m: vec![60.0, 120.0, 200.0],
            persist_datasets: true,
        }
    }
}

/// Full pipeline configuration. Every field has a default, so a config file
/// only needs the sections it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; all per-environment and per-stage seeds derive from it.
    pub seed: u64,
    /// Environments 0..train_envs feed training.
    pub train_envs: u32,
    /// Environments train_envs..train_envs+test_envs are held out.
    pub test_envs: u32,
    pub feature_kind: FeatureKind,
    pub layout: LayoutParams<f64>,
    pub cloud: CloudSection,
    pub trace: TraceConfig<f64>,
    pub arrays: ArraySection,
    pub codebook: CodebookSection,
    /// BS-centered feature grid for panoramic features.
    pub grid: VoxelGridSpec<f64>,
    pub lidar: LidarSection,
    pub link: LinkSection,
    pub model: ModelSection,
    pub eval: EvalSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            train_envs: 40,
            test_envs: 10,
            feature_kind: FeatureKind::Panoramic,
            layout: LayoutParams::default(),
            cloud: CloudSection::default(),
            trace: TraceConfig::default(),
            arrays: ArraySection::default(),
            codebook: CodebookSection::default(),
            grid: VoxelGridSpec::default_panoramic(),
            lidar: LidarSection::default(),
            link: LinkSection::default(),
            model: ModelSection::default(),
            eval: EvalSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    pub fn total_envs(&self) -> u32 {
        self.train_envs + self.test_envs
    }

    pub fn scene_layout(&self) -> SceneLayout<f64> {
        layout_from_params(self.layout)
    }

    /// Grid spec for the configured feature kind.
    pub fn feature_grid(&self) -> &VoxelGridSpec<f64> {
        match self.feature_kind {
            FeatureKind::Panoramic => &self.grid,
            FeatureKind::Lidar => &self.lidar.grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_envs == 0 || self.test_envs == 0 {
            return Err(Error::Config(
                "train_envs and test_envs must both be positive".into(),
            ));
        }
        if self.cloud.density <= 0.0 {
            return Err(Error::Config("cloud.density must be positive".into()));
        }
        if self.cloud.noise_sigma < 0.0 {
            return Err(Error::Config("cloud.noise_sigma must be non-negative".into()));
        }
        if self.codebook.n_beams == 0 {
            return Err(Error::Config("codebook.n_beams must be positive".into()));
        }
        let n_pairs = self.codebook.n_beams * self.codebook.n_beams;
        if self.eval.m_values.is_empty() {
            return Err(Error::Config("eval.m_values must not be empty".into()));
        }
        if self.eval.m_values.iter().any(|&m| m == 0 || m > n_pairs) {
            return Err(Error::Config(format!(
                "eval.m_values must lie in 1..={n_pairs}"
            )));
        }
        if self
            .experiment
            .fractions
            .iter()
            .any(|&f| !(f > 0.0 && f <= 1.0))
        {
            return Err(Error::Config(
                "experiment.fractions must lie in (0, 1]".into(),
            ));
        }
        if self.experiment.fractions.is_empty() {
            return Err(Error::Config("experiment.fractions must not be empty".into()));
        }
        if self.experiment.lidar_ranges_m.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("experiment.lidar_ranges_m must be positive".into()));
        }
        if self.lidar.range_m <= 0.0 {
            return Err(Error::Config("lidar.range_m must be positive".into()));
        }
        if self.model.batch_size == 0 || self.model.epochs == 0 {
            return Err(Error::Config(
                "model.batch_size and model.epochs must be positive".into(),
            ));
        }
        if self.link.tx_power_w <= 0.0 || self.link.noise_power_w <= 0.0 {
            return Err(Error::Config("link powers must be positive".into()));
        }
        self.trace.validate()?;
        self.grid.validate()?;
        self.lidar.grid.validate()?;
        self.lidar.scan_config(self.lidar.range_m).validate()?;
        self.scene_layout().validate()?;
        Ok(())
    }

    /// Reads a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }
}
