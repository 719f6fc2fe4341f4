use crate::config::LabelingConfig;
use crate::data_io::{
    closest_approach, interaction_onset, kinematic_profile, DataError, Movement, RawTrajectory,
};
use crate::encounter::Point;
use crate::payoff::{AStrategy, BStrategy, Outcome};

/// Mean acceleration over `[t0, t0 + window]`, from speeds at the ends.
/// The window is cut short where the track ends.
fn mean_accel(traj: &RawTrajectory, t0: f64, window: f64, smoothing: usize) -> f64 {
    let profile = kinematic_profile(traj, smoothing);
    let t1 = (t0 + window).min(traj.end_time());
    if t1 <= t0 {
        return profile.at(t0).1;
    }
    (profile.at(t1).0 - profile.at(t0).0) / (t1 - t0)
}

/// Intention outcome of a left-turn/straight pair: a vehicle yields when its
/// mean acceleration over the opening window of the interaction falls below
/// the threshold, and proceeds otherwise.
pub fn label_intention(
    a: &RawTrajectory,
    b: &RawTrajectory,
    conflict: Option<Point>,
    cfg: &LabelingConfig,
    smoothing: usize,
) -> Result<Outcome, DataError> {
    let (a, b) = if a.movement == Movement::Straight && b.movement == Movement::LeftTurn {
        (b, a)
    } else {
        (a, b)
    };
    let conflict = match conflict {
        Some(p) => p,
        None => closest_approach(a, b)
            .ok_or_else(|| DataError::NoInteraction("empty trajectory".into()))?
            .0,
    };
    let t0 = interaction_onset(a, b, conflict, cfg.radius).ok_or_else(|| {
        DataError::NoInteraction(format!(
            "{} and {} never share the detection radius",
            a.vehicle_id, b.vehicle_id
        ))
    })?;
    let yields = |t: &RawTrajectory| mean_accel(t, t0, cfg.window, smoothing) < cfg.yield_threshold;
    let sa = if yields(a) { AStrategy::Yield } else { AStrategy::Turn };
    let sb = if yields(b) { BStrategy::Yield } else { BStrategy::Drive };
    Ok(Outcome::new(sa, sb))
}
