//! Trajectory ingestion, encounter construction and the interchange formats.
//!
//! Canonical trajectory schema (header mandatory, comma separated):
//!
//! ```text
//! t,x,y,v,vehicle_id,movement
//! ```
//!
//! `v` may be empty, in which case speed is estimated from positions.
//! `movement` is `left-turn` or `straight`.

mod encounter_csv;
mod extract;
mod trajectory_csv;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encounter_csv::{read_encounters, write_encounters, ENCOUNTER_HEADER};
pub use extract::{
    average_accelerations, build_encounter, closest_approach, interaction_onset,
    kinematic_profile, pair_trajectories, AverageAccelerations, ExtractConfig, KinematicProfile,
    MovementAverages,
};
pub use trajectory_csv::{
    detect_schema, parse_trajectories, read_trajectories, write_trajectories, ParseOptions,
    Schema, CANONICAL_HEADER,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file is empty")]
    EmptyFile,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("no interaction: {0}")]
    NoInteraction(String),
    #[error("no encounters in category {0}")]
    EmptyCategory(String),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Movement {
    LeftTurn,
    Straight,
}

impl Movement {
    pub fn as_str(self) -> &'static str {
        match self {
            Movement::LeftTurn => "left-turn",
            Movement::Straight => "straight",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left-turn" | "left_turn" | "leftturn" | "left" | "l" | "lt" => Some(Movement::LeftTurn),
            "straight" | "through" | "s" | "st" | "thru" => Some(Movement::Straight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: Option<f64>,
}

impl Frame {
    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Frames of one vehicle at the source rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub vehicle_id: String,
    pub movement: Movement,
    pub frames: Vec<Frame>,
}

impl RawTrajectory {
    pub fn start_time(&self) -> f64 {
        self.frames.first().map_or(f64::NAN, |f| f.t)
    }

    pub fn end_time(&self) -> f64 {
        self.frames.last().map_or(f64::NAN, |f| f.t)
    }

    /// Position at time `t`, linearly interpolated; `None` outside the track.
    pub fn position_at(&self, t: f64) -> Option<[f64; 2]> {
        let i = locate(&self.frames, t)?;
        let f0 = &self.frames[i];
        match self.frames.get(i + 1) {
            Some(f1) if f1.t > f0.t => {
                let w = (t - f0.t) / (f1.t - f0.t);
                Some([f0.x + w * (f1.x - f0.x), f0.y + w * (f1.y - f0.y)])
            }
            _ => Some(f0.pos()),
        }
    }
}

/// Index `i` with `frames[i].t <= t < frames[i + 1].t`, clamped to the last frame.
fn locate(frames: &[Frame], t: f64) -> Option<usize> {
    let first = frames.first()?;
    let last = frames.last()?;
    if t < first.t || t > last.t {
        return None;
    }
    let i = frames.partition_point(|f| f.t <= t);
    Some(i.saturating_sub(1).min(frames.len() - 1))
}

pub(crate) fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}
