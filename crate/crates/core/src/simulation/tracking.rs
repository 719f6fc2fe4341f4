//! Kinematic bicycle model steered by rear-wheel feedback.

use serde::{Deserialize, Serialize};

use super::path::Path;
use super::SimulationError;
use crate::config::ControllerConfig;
use crate::encounter::Point;

/// Lateral deviation beyond which tracking is declared lost, m.
pub const MAX_LATERAL: f64 = 2.0;

/// One control-rate sample. Position and heading refer to the rear axle;
/// `accel` and `steer` are held until the next sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub steer: f64,
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    /// Distance from the rear axle forward to the reference point, m.
    pub reference_offset: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn reference_point(&self, i: usize) -> Point {
        let s = &self.samples[i];
        [
            s.x + self.reference_offset * s.heading.cos(),
            s.y + self.reference_offset * s.heading.sin(),
        ]
    }

    /// Largest gap between the speed implied by successive rear-axle
    /// positions and the mean of the recorded speeds at both ends.
    pub fn speed_inconsistency(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                let chord = (w[1].x - w[0].x).hypot(w[1].y - w[0].y) / (w[1].t - w[0].t);
                (chord - 0.5 * (w[0].speed + w[1].speed)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub wheelbase: f64,
    pub step: f64,
    pub substeps: usize,
    pub gains: ControllerConfig,
}

/// Steering angle from the rear-wheel feedback law. The law's angular rate
/// is proportional to speed, so speed cancels from `atan(L ω / v)`.
pub fn rear_wheel_feedback(lateral: f64, heading_error: f64, curvature: f64, wheelbase: f64, gains: &ControllerConfig) -> f64 {
    let sinc = if heading_error.abs() < 1e-9 {
        1.0
    } else {
        heading_error.sin() / heading_error
    };
    let denom = (1.0 - curvature * lateral).max(0.1);
    let rate = curvature * heading_error.cos() / denom - gains.heading_gain * heading_error - gains.lateral_gain * sinc * lateral;
    (wheelbase * rate).atan().clamp(-gains.max_steer, gains.max_steer)
}

fn wrap(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    a - (a / tau).round() * tau
}

/// A vehicle following one path.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    path: &'a Path,
    cfg: TrackerConfig,
    pub t: f64,
    pub pos: Point,
    pub heading: f64,
    pub speed: f64,
    hint: usize,
    samples: Vec<Sample>,
}

impl<'a> Tracker<'a> {
    /// Start on the path at arc length 0, aligned with it.
    pub fn at_start(path: &'a Path, speed: f64, cfg: TrackerConfig) -> Self {
        let (p, h, _) = path.pose_at(0.0);
        Self::with_pose(path, p, h, speed, cfg).expect("path start is on the path")
    }

    pub fn with_pose(path: &'a Path, pos: Point, heading: f64, speed: f64, cfg: TrackerConfig) -> Result<Self, SimulationError> {
        let (start, _, _) = path.pose_at(0.0);
        let gap = (pos[0] - start[0]).hypot(pos[1] - start[1]);
        if gap > 1.0 {
            return Err(SimulationError::BadInitialState(format!("{gap:.2} m from the path start")));
        }
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(SimulationError::BadInitialState(format!("speed {speed}")));
        }
        let pr = path.project(pos, Some(0));
        let mut t = Self {
            path,
            cfg,
            t: 0.0,
            pos,
            heading,
            speed,
            hint: pr.index,
            samples: Vec::new(),
        };
        t.samples.push(Sample {
            t: 0.0,
            x: pos[0],
            y: pos[1],
            heading,
            speed,
            accel: 0.0,
            steer: 0.0,
            lateral: pr.lateral,
        });
        Ok(t)
    }

    /// Arc length of the rear axle along the path.
    pub fn progress(&self) -> f64 {
        self.path.project(self.pos, Some(self.hint)).s
    }

    /// Arc length of the reference point (rear axle plus `offset`).
    pub fn progress_ahead(&self, offset: f64) -> f64 {
        self.progress() + offset
    }

    /// Apply `accel` for one control step.
    pub fn advance(&mut self, accel: f64) -> Result<(), SimulationError> {
        let pr = self.path.project(self.pos, Some(self.hint));
        self.hint = pr.index;
        if pr.lateral.abs() > MAX_LATERAL {
            return Err(SimulationError::TrackingDiverged {
                t: self.t,
                lateral: pr.lateral,
            });
        }
        let steer = rear_wheel_feedback(
            pr.lateral,
            wrap(self.heading - pr.heading),
            pr.curvature,
            self.cfg.wheelbase,
            &self.cfg.gains,
        );
        if let Some(last) = self.samples.last_mut() {
            last.accel = accel;
            last.steer = steer;
        }
        let dt = self.cfg.step / self.cfg.substeps.max(1) as f64;
        let yaw_per_m = steer.tan() / self.cfg.wheelbase;
        for _ in 0..self.cfg.substeps.max(1) {
            let v0 = self.speed;
            let v1 = v0 + accel * dt;
            let dist = if v1 < 0.0 {
                self.speed = 0.0;
                v0 * v0 / (2.0 * -accel)
            } else {
                self.speed = v1;
                v0 * dt + 0.5 * accel * dt * dt
            };
            let h1 = self.heading + dist * yaw_per_m;
            let mid = 0.5 * (self.heading + h1);
            self.pos[0] += dist * mid.cos();
            self.pos[1] += dist * mid.sin();
            self.heading = h1;
        }
        self.t = self.samples.len() as f64 * self.cfg.step;
        let lateral = self.path.project(self.pos, Some(self.hint)).lateral;
        self.samples.push(Sample {
            t: self.t,
            x: self.pos[0],
            y: self.pos[1],
            heading: self.heading,
            speed: self.speed,
            accel: 0.0,
            steer: 0.0,
            lateral,
        });
        Ok(())
    }

    pub fn into_trajectory(self, reference_offset: f64) -> Trajectory {
        Trajectory {
            step: self.cfg.step,
            reference_offset,
            samples: self.samples,
        }
    }
}

/// Follow `path` from its start for `duration` seconds, with the
/// acceleration chosen at each control step from `(t, progress, speed)`.
pub fn track_path(
    path: &Path,
    initial_speed: f64,
    mut accel: impl FnMut(f64, f64, f64) -> f64,
    duration: f64,
    cfg: TrackerConfig,
) -> Result<Trajectory, SimulationError> {
    let mut tr = Tracker::at_start(path, initial_speed, cfg);
    let steps = (duration / cfg.step).round() as usize;
    for _ in 0..steps {
        let a = accel(tr.t, tr.progress(), tr.speed);
        tr.advance(a)?;
    }
    Ok(tr.into_trajectory(cfg.wheelbase / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::path::fit_path;
    use std::f64::consts::FRAC_PI_2;

    fn cfg() -> TrackerConfig {
        let d = crate::Defaults::default();
        TrackerConfig {
            wheelbase: d.vehicle.wheelbase,
            step: 0.1,
            substeps: 10,
            gains: d.controller,
        }
    }

    #[test]
    fn straight_line_stays_on_path() {
        let path = fit_path(&[[0.0, 0.0], [0.0, 200.0]], None, None).unwrap();
        let traj = track_path(&path, 10.0, |_, _, _| 0.0, 15.0, cfg()).unwrap();
        assert!(traj.samples.iter().all(|s| s.lateral.abs() < 1e-3));
        assert!(traj.samples.windows(2).all(|w| ((w[1].t - w[0].t) - 0.1).abs() < 1e-12));
        assert!(traj.speed_inconsistency() < 0.05);
    }

    #[test]
    fn offset_decays_monotonically() {
        let path = fit_path(&[[0.0, 0.0], [0.0, 300.0]], None, None).unwrap();
        let mut tr = Tracker::with_pose(&path, [0.5, 0.0], FRAC_PI_2, 8.0, cfg()).unwrap();
        for _ in 0..200 {
            tr.advance(0.0).unwrap();
        }
        let traj = tr.into_trajectory(0.0);
        let e: Vec<f64> = traj.samples.iter().map(|s| s.lateral.abs()).collect();
        assert!((e[0] - 0.5).abs() < 1e-9);
        // Allow one second of transient, then no growth.
        for w in e[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", w);
        }
        assert!(*e.last().unwrap() < 1e-3);
    }

    #[test]
    fn left_turn_exits_aligned() {
        let r = 13.75;
        let mut anchors = vec![[-1.75, 40.0], [-1.75, 12.0]];
        for k in 1..=6 {
            let a = std::f64::consts::PI + FRAC_PI_2 * k as f64 / 6.0;
            anchors.push([12.0 + r * a.cos(), 12.0 + r * a.sin()]);
        }
        anchors.push([40.0, -1.75]);
        let path = fit_path(&anchors, Some(-FRAC_PI_2), Some(0.0)).unwrap();
        for v in [6.0, 9.0, 12.0] {
            let traj = track_path(&path, v, |_, _, _| 0.0, path.length() / v - 0.5, cfg()).unwrap();
            let last = traj.samples.last().unwrap();
            assert!(last.x > 20.0, "did not finish the turn");
            assert!(wrap(last.heading).abs() < 5f64.to_radians(), "exit heading {}", last.heading);
            assert!(traj.samples.iter().all(|s| s.lateral.abs() < 0.5));
            assert!(traj.speed_inconsistency() < 0.05);
        }
    }

    #[test]
    fn speed_never_negative() {
        let path = fit_path(&[[0.0, 0.0], [0.0, 100.0]], None, None).unwrap();
        let traj = track_path(&path, 3.0, |_, _, _| -2.5, 5.0, cfg()).unwrap();
        assert!(traj.samples.iter().all(|s| s.speed >= 0.0));
        assert_eq!(traj.samples.last().unwrap().speed, 0.0);
        assert!(traj.speed_inconsistency() < 0.05);
    }

    #[test]
    fn start_must_be_near_path() {
        let path = fit_path(&[[0.0, 0.0], [0.0, 100.0]], None, None).unwrap();
        assert!(matches!(
            Tracker::with_pose(&path, [3.0, 0.0], FRAC_PI_2, 1.0, cfg()),
            Err(SimulationError::BadInitialState(_))
        ));
    }
}
