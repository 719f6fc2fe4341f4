//! Trajectory-level checks: spline paths, path tracking, post-encroachment
//! time, scenario runs and the initial-state sweep.

pub mod path;
pub mod pet;
pub mod scenario;
pub mod sweep;
pub mod tracking;

use thiserror::Error;

pub use path::{fit_path, Path};
pub use pet::{compute_pet, crossing_time, signed_pet, Pet};
pub use scenario::{simulate_encounter, simulate_pair, IntersectionMap, PairResult, ScenarioConfig, SimulationResult, VehicleSpec};
pub use sweep::{sweep_initial_states, write_sweep_csv, Axis, GridSpec, SweepCell, SweepInputs, SweepReport, SweepSummary};
pub use tracking::{track_path, Sample, Tracker, TrackerConfig, Trajectory};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("degenerate path anchors: {0}")]
    DegenerateAnchors(String),
    #[error("invalid initial state: {0}")]
    BadInitialState(String),
    #[error("tracking diverged at t = {t:.1} s (lateral deviation {lateral:.2} m)")]
    TrackingDiverged { t: f64, lateral: f64 },
    #[error("trajectory never crosses the conflict point (closest {closest:.2} m)")]
    NoCrossing { closest: f64 },
}

/// Trajectory samples as CSV, reference point included, three decimals.
pub fn write_trajectory_csv<W: std::io::Write>(w: W, runs: &[(&str, &Trajectory)]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["vehicle", "t", "x", "y", "ref_x", "ref_y", "heading", "speed", "accel", "steer"])?;
    let f = |x: f64| format!("{:.3}", crate::round3(x));
    for (name, traj) in runs {
        for (i, s) in traj.samples.iter().enumerate() {
            let r = traj.reference_point(i);
            out.write_record([
                name.to_string(),
                f(s.t),
                f(s.x),
                f(s.y),
                f(r[0]),
                f(r[1]),
                f(s.heading),
                f(s.speed),
                f(s.accel),
                f(s.steer),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
