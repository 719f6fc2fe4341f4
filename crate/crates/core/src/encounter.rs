use serde::{Deserialize, Serialize};

use crate::kinematics::{accel_bounds, KinematicsConfig, KinematicsError, VehicleState};

pub type Point = [f64; 2];

/// Where the two movements cross, in map coordinates (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictGeometry {
    pub conflict_point: Point,
    /// Points on each path where the front bumper enters the conflict zone.
    pub entry_a: Point,
    pub entry_b: Point,
    /// Along-path length of the conflict zone (m), excluding vehicle length.
    pub zone_extent: f64,
}

/// A left-turn interaction between the left-turning vehicle A and the
/// straight-going vehicle B, captured at interaction onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    pub id: String,
    pub a: VehicleState,
    pub b: VehicleState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ConflictGeometry>,
}

/// The observables that enter the payoff functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub accel_a: f64,
    pub bound_a: f64,
    pub accel_b: f64,
    pub bound_b: f64,
}

impl Encounter {
    pub fn new(id: impl Into<String>, a: VehicleState, b: VehicleState) -> Self {
        Self {
            id: id.into(),
            a,
            b,
            geometry: None,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        self.a.validate()?;
        self.b.validate()
    }

    pub fn features(&self, config: &KinematicsConfig) -> Result<Features, KinematicsError> {
        let (bound_a, bound_b) = accel_bounds(&self.a, &self.b, config)?;
        Ok(Features {
            accel_a: self.a.acceleration,
            bound_a,
            accel_b: self.b.acceleration,
            bound_b,
        })
    }

    /// Same encounter with B's acceleration replaced, as perceived by A.
    pub fn with_b_acceleration(&self, accel: f64) -> Self {
        Self {
            b: self.b.with_acceleration(accel),
            ..self.clone()
        }
    }
}
