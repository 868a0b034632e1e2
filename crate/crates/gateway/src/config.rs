//! Simulator configuration file.

use std::path::Path;

use mirroreyes::compositor::OverlayFilters;
use mirroreyes::kinematics::{HeadGeometry, IKParams};
use mirroreyes::scenario::DEFAULT_STOP_KEYWORDS;
use mirroreyes::scene::{Scene, SyntheticCamera, Timeline};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_TICK_RATE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Every field is optional in the file and falls back to its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: HeadGeometry,
    pub ik: IKParams,
    pub filters: OverlayFilters,
    pub camera: SyntheticCamera,
    pub timeline: Timeline,
    /// Hz; the IK integrates with `1 / tick_rate`, overriding `ik.dt`.
    pub tick_rate: f64,
    pub stop_keywords: Vec<String>,
    pub scene: Scene,
    /// Attach PNG pupil overlays to snapshots while the mirror is on.
    pub snapshot_overlays: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let tick_rate = 50.0;
        Self {
            geometry: HeadGeometry::default(),
            ik: IKParams {
                dt: 1.0 / tick_rate,
                ..IKParams::default()
            },
            filters: OverlayFilters::default(),
            camera: SyntheticCamera::default(),
            timeline: Timeline::default(),
            tick_rate,
            stop_keywords: DEFAULT_STOP_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            scene: Scene::default(),
            snapshot_overlays: true,
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    /// Parses and validates; `ik.dt` is tied to the tick rate.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut config: SimConfig = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: "<inline>".into(),
            source,
        })?;
        config.validate()?;
        config.ik.dt = config.dt();
        Ok(config)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.geometry.validate().map_err(|e| invalid(e.to_string()))?;
        self.ik.validate().map_err(|e| invalid(e.to_string()))?;
        self.filters.validate().map_err(invalid)?;
        self.timeline.validate().map_err(invalid)?;
        self.scene.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.tick_rate.is_finite() && self.tick_rate >= MIN_TICK_RATE) {
            return Err(invalid(format!("tick_rate must be >= {MIN_TICK_RATE} Hz, got {}", self.tick_rate)));
        }
        if self.stop_keywords.is_empty() || self.stop_keywords.iter().any(|k| k.trim().is_empty()) {
            return Err(invalid("stop_keywords must be non-empty words".into()));
        }
        let cam = &self.camera;
        if cam.width == 0 || cam.height == 0 || !(cam.focal > 0.0) {
            return Err(invalid("camera needs a positive size and focal length".into()));
        }
        Ok(())
    }
}
