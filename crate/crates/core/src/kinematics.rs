//! Constant-acceleration timing toward a conflict zone and the
//! collision-avoidance acceleration bound derived from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this magnitude the acceleration is treated as zero.
pub const ZERO_ACCEL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("invalid vehicle state: {0}")]
    InvalidState(String),
    #[error("vehicle stops after {stop_distance:.3} m and never covers {distance:.3} m")]
    Unreachable { distance: f64, stop_distance: f64 },
    #[error("opponent never clears the conflict zone: {0}")]
    OpponentNeverClears(Box<KinematicsError>),
}

/// One player's kinematic state at interaction onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// m/s
    pub velocity: f64,
    /// m/s²
    pub acceleration: f64,
    /// Front bumper to conflict-zone entry, m.
    pub dist_to_conflict: f64,
    /// Distance until the rear bumper has cleared the conflict zone, m.
    pub dist_through_conflict: f64,
}

impl VehicleState {
    pub fn new(
        velocity: f64,
        acceleration: f64,
        dist_to_conflict: f64,
        dist_through_conflict: f64,
    ) -> Result<Self, KinematicsError> {
        let state = Self {
            velocity,
            acceleration,
            dist_to_conflict,
            dist_through_conflict,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let all_finite = [
            self.velocity,
            self.acceleration,
            self.dist_to_conflict,
            self.dist_through_conflict,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !all_finite {
            return Err(KinematicsError::InvalidState("non-finite field".into()));
        }
        if self.velocity < 0.0 {
            return Err(KinematicsError::InvalidState(format!(
                "negative velocity {}",
                self.velocity
            )));
        }
        if !(self.dist_to_conflict > 0.0 && self.dist_to_conflict < self.dist_through_conflict) {
            return Err(KinematicsError::InvalidState(format!(
                "need 0 < d < D, got d={} D={}",
                self.dist_to_conflict, self.dist_through_conflict
            )));
        }
        Ok(())
    }

    pub fn with_acceleration(self, acceleration: f64) -> Self {
        Self {
            acceleration,
            ..self
        }
    }

    /// Distance covered before standstill, `None` when the vehicle never stops.
    pub fn stop_distance(&self) -> Option<f64> {
        if self.acceleration < -ZERO_ACCEL {
            Some(self.velocity * self.velocity / (2.0 * -self.acceleration))
        } else if self.velocity == 0.0 && self.acceleration <= ZERO_ACCEL {
            Some(0.0)
        } else {
            None
        }
    }
}

/// Smallest nonnegative `t` with `v t + a t² / 2 = distance`, the vehicle
/// being held at standstill once its speed reaches zero.
pub fn time_to_cover(velocity: f64, acceleration: f64, distance: f64) -> Result<f64, KinematicsError> {
    if distance <= 0.0 {
        return Ok(0.0);
    }
    let a = if acceleration.abs() < ZERO_ACCEL {
        0.0
    } else {
        acceleration
    };
    let disc = velocity * velocity + 2.0 * a * distance;
    let unreachable = || KinematicsError::Unreachable {
        distance,
        stop_distance: if a < 0.0 {
            velocity * velocity / (-2.0 * a)
        } else {
            0.0
        },
    };
    if disc < 0.0 {
        return Err(unreachable());
    }
    // Rationalised root: 2d / (v + sqrt(v² + 2ad)) equals (-v + sqrt(disc)) / a
    // for a != 0 and d / v for a = 0, without cancellation.
    let denom = velocity + disc.sqrt();
    if denom <= 0.0 {
        return Err(unreachable());
    }
    Ok(2.0 * distance / denom)
}

/// Time for the front bumper to reach the conflict zone.
pub fn time_to_reach(state: &VehicleState) -> Result<f64, KinematicsError> {
    state.validate()?;
    time_to_cover(state.velocity, state.acceleration, state.dist_to_conflict)
}

/// Time for the rear bumper to clear the conflict zone.
pub fn time_to_clear(state: &VehicleState) -> Result<f64, KinematicsError> {
    state.validate()?;
    time_to_cover(state.velocity, state.acceleration, state.dist_through_conflict)
}

/// Acceleration at which `own` reaches the conflict zone exactly when the
/// opponent's rear clears it: `2 (d - v t1) / t1²` with `t1` the opponent's
/// clearing time.
pub fn collision_avoid_accel(
    own: &VehicleState,
    opponent: &VehicleState,
) -> Result<f64, KinematicsError> {
    own.validate()?;
    let t1 = time_to_clear(opponent)
        .map_err(|e| KinematicsError::OpponentNeverClears(Box::new(e)))?;
    Ok(accel_to_arrive_at(own, t1))
}

fn accel_to_arrive_at(own: &VehicleState, t: f64) -> f64 {
    2.0 * (own.dist_to_conflict - own.velocity * t) / (t * t)
}

/// Which distances and clearing time enter each vehicle's a_c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccelBoundRule {
    /// a_c of X from X's own d and v and the opponent's clearing time.
    #[default]
    Opponent,
    /// Subscripts as printed: a_c^A from (d_B, v_B, t1^B) and a_c^B from
    /// (d_A, v_A, t1^A). Kept for comparison runs only.
    Verbatim,
}

/// What to do when the relevant vehicle never clears the zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeverClearsPolicy {
    #[default]
    Error,
    /// Use the `t1 -> inf` limit of the bound, which is 0.
    ZeroLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KinematicsConfig {
    #[serde(default)]
    pub accel_bound_rule: AccelBoundRule,
    #[serde(default)]
    pub never_clears: NeverClearsPolicy,
}

/// Collision-avoidance bounds `(a_c^A, a_c^B)` for a pair of states.
pub fn accel_bounds(
    a: &VehicleState,
    b: &VehicleState,
    config: &KinematicsConfig,
) -> Result<(f64, f64), KinematicsError> {
    a.validate()?;
    b.validate()?;
    let bound = |own: &VehicleState, clearing: &VehicleState| match time_to_clear(clearing) {
        Ok(t1) => Ok(accel_to_arrive_at(own, t1)),
        Err(e) => match config.never_clears {
            NeverClearsPolicy::Error => Err(KinematicsError::OpponentNeverClears(Box::new(e))),
            NeverClearsPolicy::ZeroLimit => Ok(0.0),
        },
    };
    match config.accel_bound_rule {
        AccelBoundRule::Opponent => Ok((bound(a, b)?, bound(b, a)?)),
        AccelBoundRule::Verbatim => Ok((bound(b, b)?, bound(a, a)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: f64, a: f64, d: f64, dd: f64) -> VehicleState {
        VehicleState::new(v, a, d, dd).unwrap()
    }

    /// Forward-Euler integration of constant-acceleration motion, clamped at
    /// standstill. Returns the first time the covered distance reaches `d`.
    fn euler_arrival(v0: f64, a: f64, d: f64) -> Option<f64> {
        let dt = 1e-4;
        let (mut t, mut x, mut v) = (0.0, 0.0, v0);
        while x < d {
            if v <= 0.0 && a <= 0.0 {
                return None;
            }
            x += v * dt;
            v = (v + a * dt).max(0.0);
            t += dt;
            if t > 1e4 {
                return None;
            }
        }
        Some(t)
    }

    #[test]
    fn uniform_and_from_rest() {
        assert_eq!(time_to_reach(&st(10.0, 0.0, 20.0, 30.0)).unwrap(), 2.0);
        assert!((time_to_reach(&st(0.0, 2.0, 4.0, 16.0)).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(time_to_clear(&st(10.0, 0.0, 20.0, 30.0)).unwrap(), 3.0);
        assert!((time_to_clear(&st(0.0, 2.0, 4.0, 16.0)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn decelerating_vehicle_stops_short() {
        let err = time_to_reach(&st(5.0, -1.0, 30.0, 40.0)).unwrap_err();
        match err {
            KinematicsError::Unreachable { stop_distance, .. } => {
                assert!((stop_distance - 12.5).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(time_to_reach(&st(0.0, 0.0, 1.0, 2.0)).is_err());
        assert!(time_to_reach(&st(0.0, -1.0, 1.0, 2.0)).is_err());
    }

    #[test]
    fn closed_form_matches_integration() {
        let t = time_to_reach(&st(8.0, 1.5, 25.0, 40.0)).unwrap();
        let oracle = euler_arrival(8.0, 1.5, 25.0).unwrap();
        assert!((t - oracle).abs() < 1e-3, "{t} vs {oracle}");

        let t = time_to_clear(&st(6.0, -0.5, 10.0, 20.0)).unwrap();
        let oracle = euler_arrival(6.0, -0.5, 20.0).unwrap();
        assert!((t - oracle).abs() < 1e-3, "{t} vs {oracle}");
    }

    #[test]
    fn tiny_acceleration_uses_linear_limit() {
        let t = time_to_reach(&st(10.0, 1e-12, 20.0, 30.0)).unwrap();
        assert_eq!(t, 2.0);
    }

    #[test]
    fn avoidance_accel_examples() {
        // Opponent clears in exactly 2 s: uniform 10 m/s over 20 m.
        let opp = st(10.0, 0.0, 5.0, 20.0);
        let a = collision_avoid_accel(&st(5.0, 0.0, 20.0, 30.0), &opp).unwrap();
        assert!((a - 5.0).abs() < 1e-12);
        let a = collision_avoid_accel(&st(10.0, 0.0, 20.0, 30.0), &opp).unwrap();
        assert!(a.abs() < 1e-12);

        // t1 = 3 s; oracle: the Euler arrival time under the returned bound.
        let opp = st(10.0, 0.0, 5.0, 30.0);
        let own = st(12.0, 0.0, 15.0, 25.0);
        let a_c = collision_avoid_accel(&own, &opp).unwrap();
        assert!((a_c - 2.0 * (15.0 - 36.0) / 9.0).abs() < 1e-12);
        // v t1 > 2 d: the bound stops the vehicle before t1, so the first
        // arrival is earlier than t1.
        let arrival = euler_arrival(12.0, a_c, 15.0).unwrap();
        assert!(arrival < 3.0);

        let opp = st(10.0, 0.0, 5.0, 30.0);
        let own = st(6.0, 0.0, 15.0, 25.0);
        let a_c = collision_avoid_accel(&own, &opp).unwrap();
        let arrival = euler_arrival(6.0, a_c, 15.0).unwrap();
        assert!((arrival - 3.0).abs() < 1e-3);
    }

    #[test]
    fn opponent_that_never_clears() {
        let opp = st(5.0, -1.0, 5.0, 30.0);
        let own = st(5.0, 0.0, 20.0, 30.0);
        assert!(matches!(
            collision_avoid_accel(&own, &opp),
            Err(KinematicsError::OpponentNeverClears(_))
        ));
        let cfg = KinematicsConfig {
            never_clears: NeverClearsPolicy::ZeroLimit,
            ..Default::default()
        };
        let (ac_a, _) = accel_bounds(&own, &opp, &cfg).unwrap();
        assert_eq!(ac_a, 0.0);
    }

    #[test]
    fn verbatim_rule_uses_printed_subscripts() {
        let a = st(5.0, 0.0, 20.0, 30.0);
        let b = st(10.0, 0.0, 5.0, 20.0);
        let cfg = KinematicsConfig {
            accel_bound_rule: AccelBoundRule::Verbatim,
            ..Default::default()
        };
        let (ac_a, ac_b) = accel_bounds(&a, &b, &cfg).unwrap();
        // a_c^A = 2 (d_B - v_B t1^B) / t1^B² with t1^B = 2 s.
        assert!((ac_a - 2.0 * (5.0 - 20.0) / 4.0).abs() < 1e-12);
        // a_c^B = 2 (d_A - v_A t1^A) / t1^A² with t1^A = 6 s.
        assert!((ac_b - 2.0 * (20.0 - 30.0) / 36.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(VehicleState::new(-1.0, 0.0, 1.0, 2.0).is_err());
        assert!(VehicleState::new(1.0, 0.0, 2.0, 2.0).is_err());
        assert!(VehicleState::new(1.0, 0.0, 0.0, 2.0).is_err());
        assert!(VehicleState::new(f64::NAN, 0.0, 1.0, 2.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn valid_state() -> impl Strategy<Value = VehicleState> {
            (0.0..20.0f64, -3.0..3.0f64, 0.5..50.0f64, 0.5..30.0f64)
                .prop_map(|(v, a, d, extra)| VehicleState::new(v, a, d, d + extra).unwrap())
        }

        proptest! {
            #[test]
            fn root_reproduces_distance(s in valid_state()) {
                if let Ok(t) = time_to_reach(&s) {
                    let x = s.velocity * t + 0.5 * s.acceleration * t * t;
                    prop_assert!((x - s.dist_to_conflict).abs() <= 1e-9 * s.dist_to_conflict.max(1.0));
                    prop_assert!(t >= 0.0);
                }
            }

            #[test]
            fn reach_before_clear(s in valid_state()) {
                if let Ok(t1) = time_to_clear(&s) {
                    prop_assert!(time_to_reach(&s).unwrap() <= t1);
                }
            }

            #[test]
            fn bound_decreases_with_later_clearing(v in 0.1..20.0f64, d in 0.5..50.0f64, t in 0.2..10.0f64, dt in 0.01..5.0f64) {
                // d a_c / d t1 = 2 (v t1 - 2 d) / t1³ < 0 while v t1 < 2 d.
                let own = VehicleState::new(v, 0.0, d, d + 10.0).unwrap();
                let t2 = t + dt;
                if v * t2 < 2.0 * d {
                    prop_assert!(accel_to_arrive_at(&own, t2) < accel_to_arrive_at(&own, t));
                }
            }

            #[test]
            fn bound_round_trips(own in valid_state(), opp in valid_state()) {
                if let Ok(a_c) = collision_avoid_accel(&own, &opp) {
                    let t1 = time_to_clear(&opp).unwrap();
                    // t1 is the first root only when the bound does not stop
                    // the vehicle earlier, i.e. v t1 <= 2 d.
                    if own.velocity * t1 <= 2.0 * own.dist_to_conflict {
                        let t = time_to_reach(&own.with_acceleration(a_c)).unwrap();
                        prop_assert!((t - t1).abs() < 1e-6, "{} vs {}", t, t1);
                    }
                }
            }
        }
    }
}
