//! Run defaults, loaded from the versioned `config/defaults.toml`.

use serde::{Deserialize, Serialize};

use crate::kinematics::KinematicsConfig;

const DEFAULTS: &str = include_str!("../config/defaults.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub delta_fallback: f64,
    pub kinematics: KinematicsConfig,
    pub beliefs: BeliefDefaults,
    pub labeling: LabelingConfig,
    pub vehicle: VehicleConfig,
    pub data: DataConfig,
    pub simulation: SimulationConfig,
    pub controller: ControllerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefDefaults {
    pub rush: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

/// Intention labeling thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    /// Both vehicles within this distance of the conflict point opens the window, m.
    pub radius: f64,
    /// Length of the window over which mean acceleration is taken, s.
    pub window: f64,
    /// Mean acceleration below this marks a yielding intention, m/s².
    pub yield_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub length: f64,
    pub wheelbase: f64,
    /// Half of the conflict zone's along-path extent, m.
    pub zone_half_extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Frames in the moving average applied to acceleration.
    pub smoothing_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub step: f64,
    pub substeps: usize,
    pub post_conflict_accel: f64,
    pub hv_after_stop_av_first: [f64; 2],
    pub hv_after_stop_av_later: [f64; 2],
    pub pet_danger_threshold: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub heading_gain: f64,
    pub lateral_gain: f64,
    pub max_steer: f64,
}

impl Defaults {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }
}

impl Default for Defaults {
    fn default() -> Self {
        Self::parse(DEFAULTS).expect("shipped defaults.toml parses")
    }
}
