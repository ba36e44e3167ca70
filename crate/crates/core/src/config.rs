//! Deployment configuration: `config.yaml` for pipeline, sensing and camera
//! placement, one calibration JSON per camera, `CONFIG_` environment
//! overrides, and the content hash stamped on every report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::decision::{PipelineParams, Rule, TrackerConfig};
use crate::eval::{Provenance, RunConfig};
use crate::geometry::{CameraModel, Projection};
use crate::scenario::{CameraPose, GroundTruthParams};
use crate::sensor::{RecallCurve, SensorCamera, SensorConfig};

/// Prefix of environment variables that override config keys. Nested keys
/// are joined with `__`, e.g. `CONFIG_SENSOR__SEED=7` or
/// `CONFIG_PIPELINE__D_MAX=20`.
pub const ENV_PREFIX: &str = "CONFIG_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("override {key}: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSettings {
    pub apply_loc_error: bool,
    pub stochastic: bool,
    pub latency_frames: usize,
    #[serde(default = "one")]
    pub dropout_scale: f64,
    /// Path to a recall-curve JSON, relative to the config file. The bundled
    /// curve is used when absent.
    #[serde(default)]
    pub recall_curve: Option<PathBuf>,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub occlusion_windows: BTreeMap<String, Vec<[f64; 2]>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
    pub height_m: f64,
    pub pitch_deg: f64,
    /// Calibration JSON, relative to the config file.
    pub calibration_ref: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerSettings {
    pub host: String,
    pub port: u16,
}

impl Default for ServerSettings {
    fn default() -> Self {
        ServerSettings { host: "127.0.0.1".into(), port: 8750 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    pub pipeline: PipelineParams,
    #[serde(default)]
    pub rule: Rule,
    pub predictor_order: u8,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub ground_truth: GroundTruthParams,
    pub sensor: SensorSettings,
    pub cameras: Vec<CameraEntry>,
    #[serde(default)]
    pub server: ServerSettings,
}

/// Intrinsics as written by the calibration tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub version: String,
    pub projection: Projection,
    pub focal_px: f64,
    pub optical_center: [f64; 2],
    pub crop_size: [u32; 2],
    pub fov_deg: f64,
    #[serde(default)]
    pub rms_reprojection_px: Option<f64>,
}

impl CalibrationFile {
    pub fn camera(&self, height_m: f64, pitch_deg: f64) -> Result<CameraModel, ConfigError> {
        CameraModel::new(self.projection, self.focal_px, self.optical_center, self.crop_size, self.fov_deg, height_m, pitch_deg)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), reason: e.to_string() })
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })
}

/// A config with its calibrations and recall curve resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConfig {
    pub config: AppConfig,
    /// Keyed by `calibration_ref` as written in the config.
    pub calibrations: BTreeMap<String, CalibrationFile>,
    pub curve: RecallCurve,
    pub config_hash: String,
}

impl LoadedConfig {
    /// Reads `path`, applies `CONFIG_` overrides from the process
    /// environment and resolves referenced files.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with(path, std::env::vars(), None)
    }

    /// As [`LoadedConfig::load`] with explicit overrides. `calibration`
    /// replaces every camera's calibration file when given.
    pub fn load_with(
        path: &Path,
        env: impl IntoIterator<Item = (String, String)>,
        calibration: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut value: Value =
            serde_yaml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), reason: e.to_string() })?;
        apply_overrides(&mut value, env)?;
        let config: AppConfig = serde_json::from_value(value)
            .map_err(|e| ConfigError::Parse { path: path.into(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));

        let mut calibrations = BTreeMap::new();
        for cam in &config.cameras {
            let key = cam.calibration_ref.display().to_string();
            let file = calibration.map(Path::to_path_buf).unwrap_or_else(|| base.join(&cam.calibration_ref));
            calibrations.insert(key, CalibrationFile::load(&file)?);
        }
        let curve = match &config.sensor.recall_curve {
            Some(p) => RecallCurve::load(&base.join(p)).map_err(|reason| ConfigError::Parse { path: p.clone(), reason })?,
            None => RecallCurve::bundled(),
        };
        Self::from_parts(config, calibrations, curve)
    }

    pub fn from_parts(
        config: AppConfig,
        calibrations: BTreeMap<String, CalibrationFile>,
        curve: RecallCurve,
    ) -> Result<Self, ConfigError> {
        let config_hash = content_hash(&config, &calibrations, &curve);
        let loaded = LoadedConfig { config, calibrations, curve, config_hash };
        loaded.run_config()?.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(loaded)
    }

    /// The shipped `data/config.yaml`, without environment overrides.
    pub fn bundled() -> Result<Self, ConfigError> {
        Self::load_with(&bundled_config_path(), std::iter::empty(), None)
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let c = &self.config;
        let cameras = c
            .cameras
            .iter()
            .map(|cam| {
                let cal = &self.calibrations[&cam.calibration_ref.display().to_string()];
                Ok(SensorCamera::new(
                    CameraPose { x: cam.x, y: cam.y, yaw_deg: cam.yaw_deg },
                    cal.camera(cam.height_m, cam.pitch_deg)?,
                ))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let sensor = SensorConfig {
            apply_loc_error: c.sensor.apply_loc_error,
            stochastic: c.sensor.stochastic,
            curve: self.curve.clone(),
            latency_frames: c.sensor.latency_frames,
            cameras,
            occlusion_windows: c.sensor.occlusion_windows.clone(),
            dropout_scale: c.sensor.dropout_scale,
            seed: c.sensor.seed,
        };
        Ok(RunConfig {
            params: c.pipeline,
            rule: c.rule,
            predictor_order: c.predictor_order,
            tracker: c.tracker,
            sensor,
            gt: c.ground_truth,
            trials: c.sensor.trials,
        })
    }

    pub fn calibration_version(&self) -> String {
        self.config
            .cameras
            .first()
            .and_then(|c| self.calibrations.get(&c.calibration_ref.display().to_string()))
            .map_or_else(|| "none".into(), |c| c.version.clone())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { config_hash: self.config_hash.clone(), calibration_version: self.calibration_version() }
    }
}

pub fn bundled_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/config.yaml")
}

/// SHA-256 of the canonical JSON of the config, calibrations and recall
/// curve. Map keys serialize sorted, so the hash ignores file formatting.
pub fn content_hash(config: &AppConfig, calibrations: &BTreeMap<String, CalibrationFile>, curve: &RecallCurve) -> String {
    let canonical = serde_json::json!({ "config": config, "calibrations": calibrations, "recall_curve": curve });
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Applies `CONFIG_A__B=value` entries to `value["a"]["b"]`. Values are
/// parsed as YAML scalars so numbers and booleans keep their types.
pub fn apply_overrides(value: &mut Value, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    let mut entries: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    entries.sort();
    for (key, raw) in entries {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        let err = |reason: &str| ConfigError::Override { key: key.clone(), reason: reason.into() };
        if path.iter().any(String::is_empty) {
            return Err(err("empty key segment"));
        }
        let parsed: Value = serde_yaml::from_str(&raw).map_err(|e| err(&e.to_string()))?;
        let mut node = &mut *value;
        for (i, seg) in path.iter().enumerate() {
            let map = node.as_object_mut().ok_or_else(|| err("parent is not a mapping"))?;
            if i + 1 == path.len() {
                map.insert(seg.clone(), parsed.clone());
                break;
            }
            node = map.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}
