//! Post-encroachment time from two simulated trajectories.

use serde::{Deserialize, Serialize};

use super::tracking::Trajectory;
use super::SimulationError;
use crate::encounter::Point;

/// A crossing must pass at least this close to the conflict point, m.
pub const MAX_MISS: f64 = 0.5;

/// Time at which the reference point passes the conflict point: where its
/// along-heading offset to the point changes sign, interpolated linearly.
pub fn crossing_time(traj: &Trajectory, conflict: Point) -> Result<f64, SimulationError> {
    let n = traj.samples.len();
    let gap = |p: Point| (p[0] - conflict[0]).hypot(p[1] - conflict[1]);
    let mut closest = f64::INFINITY;
    for i in 0..n.saturating_sub(1) {
        let (p0, p1) = (traj.reference_point(i), traj.reference_point(i + 1));
        let d = [p1[0] - p0[0], p1[1] - p0[1]];
        let len = d[0].hypot(d[1]);
        closest = closest.min(gap(p0));
        if len == 0.0 {
            continue;
        }
        let along = |p: Point| ((p[0] - conflict[0]) * d[0] + (p[1] - conflict[1]) * d[1]) / len;
        let (a0, a1) = (along(p0), along(p1));
        if a0 < 0.0 && a1 >= 0.0 {
            let w = -a0 / (a1 - a0);
            let hit = [p0[0] + w * d[0], p0[1] + w * d[1]];
            if gap(hit) <= MAX_MISS {
                let (t0, t1) = (traj.samples[i].t, traj.samples[i + 1].t);
                return Ok(t0 + w * (t1 - t0));
            }
            closest = closest.min(gap(hit));
        }
    }
    if n > 0 {
        closest = closest.min(gap(traj.reference_point(n - 1)));
    }
    Err(SimulationError::NoCrossing { closest })
}

/// `t(second) - t(first)`; negative when `second` actually crossed first.
pub fn signed_pet(first: &Trajectory, second: &Trajectory, conflict: Point) -> Result<f64, SimulationError> {
    Ok(crossing_time(second, conflict)? - crossing_time(first, conflict)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pet {
    pub value: f64,
    /// Whether the first argument crossed first (or at the same time).
    pub first_crossed_first: bool,
}

pub fn compute_pet(a: &Trajectory, b: &Trajectory, conflict: Point) -> Result<Pet, SimulationError> {
    let d = signed_pet(a, b, conflict)?;
    Ok(Pet {
        value: d.abs(),
        first_crossed_first: d >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::tracking::Sample;

    /// Constant-speed straight run along x through the origin, delayed by `shift`.
    fn run(shift: f64, axis: usize) -> Trajectory {
        let samples = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1;
                let s = 10.0 * (t - shift) - 20.0;
                let mut p = [0.0, 0.0];
                p[axis] = s;
                Sample {
                    t,
                    x: p[0],
                    y: p[1],
                    heading: if axis == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 },
                    speed: 10.0,
                    accel: 0.0,
                    steer: 0.0,
                    lateral: 0.0,
                }
            })
            .collect();
        Trajectory {
            step: 0.1,
            reference_offset: 0.0,
            samples,
        }
    }

    #[test]
    fn shifted_copy() {
        let (a, b) = (run(0.0, 0), run(3.0, 0));
        assert!((compute_pet(&a, &b, [0.0, 0.0]).unwrap().value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn simultaneous_arrival() {
        let (a, b) = (run(0.0, 0), run(0.0, 1));
        assert!(compute_pet(&a, &b, [0.0, 0.0]).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn swapping_negates_signed_value() {
        let (a, b) = (run(0.35, 0), run(1.62, 1));
        let ab = signed_pet(&a, &b, [0.0, 0.0]).unwrap();
        let ba = signed_pet(&b, &a, [0.0, 0.0]).unwrap();
        assert!((ab + ba).abs() < 1e-12 && ab > 0.0);
        assert!(!compute_pet(&b, &a, [0.0, 0.0]).unwrap().first_crossed_first);
    }

    #[test]
    fn missing_the_point() {
        let a = run(0.0, 0);
        assert!(matches!(crossing_time(&a, [0.0, 3.0]), Err(SimulationError::NoCrossing { .. })));
    }
}
