//! Game-theoretic information disclosure for an AV with an external
//! human-machine interface (EHMI) at an unprotected left turn.
//!
//! The left-turning human-driven vehicle is player A, the straight-going AV
//! is player B. The crate calibrates the players' payoff functions from
//! trajectory data, solves the simultaneous and sequential forms of the
//! 2x2 game probabilistically, decides whether, when and what the AV should
//! display (including benevolent deception), and measures the safety effect
//! through trajectory simulation and post-encroachment time.

pub mod calibration;
pub mod config;
pub mod data_io;
pub mod disclosure;
pub mod encounter;
pub mod game;
pub mod kinematics;
pub mod payoff;
pub mod simulation;

pub use config::Defaults;
pub use encounter::{ConflictGeometry, Encounter, Features, Point};
pub use game::{DeltaRule, GameForm, OutcomeDistribution};
pub use kinematics::{KinematicsConfig, KinematicsError, VehicleState};
pub use payoff::{AStrategy, BStrategy, Outcome, PayoffParams, Player, UtilityMatrix};

/// Round to three decimals for byte-stable reports.
pub fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
