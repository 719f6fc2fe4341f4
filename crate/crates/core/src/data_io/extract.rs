//! From raw trajectories to encounters: speed and acceleration estimation,
//! interaction onset, and the distances d and D of each vehicle.

use serde::{Deserialize, Serialize};

use super::{dist, DataError, Movement, RawTrajectory};
use crate::config::Defaults;
use crate::encounter::{ConflictGeometry, Encounter, Point};
use crate::kinematics::VehicleState;
use crate::payoff::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Interaction starts once both vehicles are within this distance of the
    /// conflict point, m.
    pub radius: f64,
    pub vehicle_length: f64,
    pub zone_half_extent: f64,
    pub smoothing_window: usize,
    /// Known conflict point; estimated from the two paths when absent.
    pub conflict_point: Option<Point>,
    /// Paths further apart than this are not considered crossing, m.
    pub max_path_gap: f64,
}

impl ExtractConfig {
    pub fn from_defaults(d: &Defaults) -> Self {
        Self {
            radius: d.labeling.radius,
            vehicle_length: d.vehicle.length,
            zone_half_extent: d.vehicle.zone_half_extent,
            smoothing_window: d.data.smoothing_window,
            conflict_point: None,
            max_path_gap: 2.0,
        }
    }
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self::from_defaults(&Defaults::default())
    }
}

/// Per-frame speed and smoothed acceleration of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicProfile {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl KinematicProfile {
    /// `(v, a)` at time `t`, linearly interpolated and clamped to the ends.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        if n == 1 || t <= self.t[0] {
            return (self.v[0], self.a[0]);
        }
        if t >= self.t[n - 1] {
            return (self.v[n - 1], self.a[n - 1]);
        }
        let i = self.t.partition_point(|x| *x <= t) - 1;
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        (
            self.v[i] + w * (self.v[i + 1] - self.v[i]),
            self.a[i] + w * (self.a[i + 1] - self.a[i]),
        )
    }
}

fn central_diff(t: &[f64], f: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = match (i, n) {
                (_, 1) => return 0.0,
                (0, _) => (0, 1),
                (i, n) if i == n - 1 => (n - 2, n - 1),
                (i, _) => (i - 1, i + 1),
            };
            let dt = t[hi] - t[lo];
            if dt > 0.0 {
                (f(hi) - f(lo)) / dt
            } else {
                0.0
            }
        })
        .collect()
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Speed (recorded, or central differences of position where missing) and
/// acceleration (central differences of speed, then a centred moving average).
pub fn kinematic_profile(traj: &RawTrajectory, window: usize) -> KinematicProfile {
    let t: Vec<f64> = traj.frames.iter().map(|f| f.t).collect();
    let n = t.len();
    let estimated = central_diff(&t, |_| 0.0);
    let mut v = estimated;
    if traj.frames.iter().any(|f| f.v.is_none()) {
        let frames = &traj.frames;
        for (i, vi) in v.iter_mut().enumerate() {
            let (lo, hi) = match (i, n) {
                (_, 1) => (0, 0),
                (0, _) => (0, 1),
                (i, n) if i == n - 1 => (n - 2, n - 1),
                (i, _) => (i - 1, i + 1),
            };
            let dt = t[hi] - t[lo];
            *vi = if dt > 0.0 {
                dist(frames[hi].pos(), frames[lo].pos()) / dt
            } else {
                0.0
            };
        }
    }
    for (vi, f) in v.iter_mut().zip(&traj.frames) {
        if let Some(rec) = f.v {
            *vi = rec;
        }
    }
    let raw_a = central_diff(&t, |i| v[i]);
    let a = if n == 0 { raw_a } else { moving_average(&raw_a, window) };
    KinematicProfile { t, v, a }
}

/// First common time at which both vehicles are within `radius` of `conflict`.
pub fn interaction_onset(a: &RawTrajectory, b: &RawTrajectory, conflict: Point, radius: f64) -> Option<f64> {
    let lo = a.start_time().max(b.start_time());
    let hi = a.end_time().min(b.end_time());
    if !(lo <= hi) {
        return None;
    }
    let mut times: Vec<f64> = a
        .frames
        .iter()
        .chain(&b.frames)
        .map(|f| f.t)
        .filter(|t| (lo..=hi).contains(t))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.into_iter().find(|&t| {
        let pa = a.position_at(t).expect("inside overlap");
        let pb = b.position_at(t).expect("inside overlap");
        dist(pa, conflict) <= radius && dist(pb, conflict) <= radius
    })
}

fn segment_closest(p: Point, q0: Point, q1: Point) -> (f64, Point) {
    let d = [q1[0] - q0[0], q1[1] - q0[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let w = if len2 > 0.0 {
        (((p[0] - q0[0]) * d[0] + (p[1] - q0[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [q0[0] + w * d[0], q0[1] + w * d[1]];
    (w, c)
}

fn segment_intersection(p0: Point, p1: Point, q0: Point, q1: Point) -> Option<Point> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den.abs() < 1e-12 {
        return None;
    }
    let qp = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then(|| [p0[0] + t * r[0], p0[1] + t * r[1]])
}

/// Crossing point of the two paths, or the midpoint of their closest
/// approach, with the gap between them.
pub fn closest_approach(a: &RawTrajectory, b: &RawTrajectory) -> Option<(Point, f64)> {
    let pa: Vec<Point> = a.frames.iter().map(|f| f.pos()).collect();
    let pb: Vec<Point> = b.frames.iter().map(|f| f.pos()).collect();
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let seg = |p: &[Point]| -> Vec<(Point, Point)> {
        if p.len() == 1 {
            vec![(p[0], p[0])]
        } else {
            p.windows(2).map(|w| (w[0], w[1])).collect()
        }
    };
    let (sa, sb) = (seg(&pa), seg(&pb));
    let mut best: Option<(Point, f64)> = None;
    for &(a0, a1) in &sa {
        for &(b0, b1) in &sb {
            if let Some(x) = segment_intersection(a0, a1, b0, b1) {
                return Some((x, 0.0));
            }
            for (p, q0, q1, flip) in [(a0, b0, b1, false), (a1, b0, b1, false), (b0, a0, a1, true), (b1, a0, a1, true)] {
                let (_, c) = segment_closest(p, q0, q1);
                let gap = dist(p, c);
                if best.map_or(true, |(_, g)| gap < g) {
                    let _ = flip;
                    best = Some(([(p[0] + c[0]) / 2.0, (p[1] + c[1]) / 2.0], gap));
                }
            }
        }
    }
    best
}

/// Along-track distance from the position at `t0` to the closest approach
/// of `conflict`, plus the point `back` metres before it on the track.
fn distance_along(traj: &RawTrajectory, t0: f64, conflict: Point, back: f64) -> Option<(f64, Point)> {
    let start = traj.position_at(t0)?;
    let mut pts = vec![start];
    pts.extend(traj.frames.iter().filter(|f| f.t > t0).map(|f| f.pos()));
    if pts.len() < 2 {
        return None;
    }
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + dist(w[0], w[1]));
    }
    let mut best = (f64::INFINITY, 0.0);
    for (i, w) in pts.windows(2).enumerate() {
        let (frac, c) = segment_closest(conflict, w[0], w[1]);
        let gap = dist(conflict, c);
        if gap < best.0 {
            best = (gap, cum[i] + frac * (cum[i + 1] - cum[i]));
        }
    }
    let s_c = best.1;
    let s_entry = (s_c - back).max(0.0);
    let i = cum.partition_point(|c| *c <= s_entry).clamp(1, pts.len() - 1) - 1;
    let seg_len = cum[i + 1] - cum[i];
    let w = if seg_len > 0.0 { (s_entry - cum[i]) / seg_len } else { 0.0 };
    let entry = [
        pts[i][0] + w * (pts[i + 1][0] - pts[i][0]),
        pts[i][1] + w * (pts[i + 1][1] - pts[i][1]),
    ];
    Some((s_c, entry))
}

/// Encounter at interaction onset. `d` is measured to where the front bumper
/// reaches the zone, `D = d + zone extent + vehicle length`.
pub fn build_encounter(a: &RawTrajectory, b: &RawTrajectory, cfg: &ExtractConfig) -> Result<Encounter, DataError> {
    let (traj_a, traj_b) = match (a.movement, b.movement) {
        (Movement::LeftTurn, Movement::Straight) => (a, b),
        (Movement::Straight, Movement::LeftTurn) => (b, a),
        _ => {
            return Err(DataError::NoInteraction(format!(
                "{} and {} are not a left-turn/straight pair",
                a.vehicle_id, b.vehicle_id
            )))
        }
    };
    let conflict = match cfg.conflict_point {
        Some(p) => p,
        None => {
            let (p, gap) = closest_approach(traj_a, traj_b).ok_or_else(|| DataError::NoInteraction("empty trajectory".into()))?;
            if gap > cfg.max_path_gap {
                return Err(DataError::NoInteraction(format!(
                    "paths of {} and {} stay {gap:.2} m apart",
                    traj_a.vehicle_id, traj_b.vehicle_id
                )));
            }
            p
        }
    };
    let t0 = interaction_onset(traj_a, traj_b, conflict, cfg.radius).ok_or_else(|| {
        DataError::NoInteraction(format!(
            "{} and {} are never both within {} m of the conflict point",
            traj_a.vehicle_id, traj_b.vehicle_id, cfg.radius
        ))
    })?;
    let h = cfg.zone_half_extent;
    let front = h + cfg.vehicle_length / 2.0;
    let state = |traj: &RawTrajectory| -> Result<(VehicleState, Point), DataError> {
        let (s_c, entry) = distance_along(traj, t0, conflict, h)
            .ok_or_else(|| DataError::NoInteraction(format!("{} ends at onset", traj.vehicle_id)))?;
        let d = s_c - front;
        if d <= 0.0 {
            return Err(DataError::NoInteraction(format!(
                "{} is already in the conflict zone at onset",
                traj.vehicle_id
            )));
        }
        let (v, acc) = kinematic_profile(traj, cfg.smoothing_window).at(t0);
        let state = VehicleState::new(v.max(0.0), acc, d, d + 2.0 * h + cfg.vehicle_length)?;
        Ok((state, entry))
    };
    let (sa, entry_a) = state(traj_a)?;
    let (sb, entry_b) = state(traj_b)?;
    Ok(Encounter {
        id: format!("{}-{}", traj_a.vehicle_id, traj_b.vehicle_id),
        a: sa,
        b: sb,
        geometry: Some(ConflictGeometry {
            conflict_point: conflict,
            entry_a,
            entry_b,
            zone_extent: 2.0 * h,
        }),
    })
}

/// Time at which the track passes closest to `p`.
fn time_nearest(traj: &RawTrajectory, p: Point) -> f64 {
    traj.frames
        .iter()
        .min_by(|x, y| dist(x.pos(), p).total_cmp(&dist(y.pos(), p)))
        .map_or(f64::NAN, |f| f.t)
}

/// Pair each left-turning trajectory with the unused straight trajectory
/// whose conflict-point passage is closest in time. Returns index pairs
/// `(left_turn, straight)` into `trajs`.
pub fn pair_trajectories(trajs: &[RawTrajectory], cfg: &ExtractConfig) -> Vec<(usize, usize)> {
    let mut used = vec![false; trajs.len()];
    let mut pairs = Vec::new();
    for (i, a) in trajs.iter().enumerate() {
        if a.movement != Movement::LeftTurn {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (j, b) in trajs.iter().enumerate() {
            if b.movement != Movement::Straight || used[j] {
                continue;
            }
            let conflict = match cfg.conflict_point {
                Some(p) => p,
                None => match closest_approach(a, b) {
                    Some((p, gap)) if gap <= cfg.max_path_gap => p,
                    _ => continue,
                },
            };
            if interaction_onset(a, b, conflict, cfg.radius).is_none() {
                continue;
            }
            let gap = (time_nearest(a, conflict) - time_nearest(b, conflict)).abs();
            if best.map_or(true, |(g, _)| gap < g) {
                best = Some((gap, j));
            }
        }
        if let Some((_, j)) = best {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Mean onset acceleration of one movement when it passed first or later.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MovementAverages {
    pub pass_first: Option<f64>,
    pub pass_later: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AverageAccelerations {
    pub left_turn: MovementAverages,
    pub straight: MovementAverages,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Average accelerations per movement. A passes first in o12 and later in
/// o21; B the other way round. o11 and o22 carry no passing order.
pub fn average_accelerations(labeled: &[(Encounter, Outcome)]) -> AverageAccelerations {
    let pick = |o: Outcome, f: fn(&Encounter) -> f64| {
        mean(labeled.iter().filter(|(_, l)| *l == o).map(|(e, _)| f(e)))
    };
    AverageAccelerations {
        left_turn: MovementAverages {
            pass_first: pick(Outcome::O12, |e| e.a.acceleration),
            pass_later: pick(Outcome::O21, |e| e.a.acceleration),
        },
        straight: MovementAverages {
            pass_first: pick(Outcome::O21, |e| e.b.acceleration),
            pass_later: pick(Outcome::O12, |e| e.b.acceleration),
        },
    }
}

impl MovementAverages {
    /// `(pass_first, pass_later)`, substituting `fallback` per empty category.
    pub fn or_fallback(&self, fallback: (f64, f64)) -> Result<(f64, f64), (f64, f64, DataError)> {
        match (self.pass_first, self.pass_later) {
            (Some(f), Some(l)) => Ok((f, l)),
            (f, l) => {
                let which = if f.is_none() { "pass-first" } else { "pass-later" };
                Err((
                    f.unwrap_or(fallback.0),
                    l.unwrap_or(fallback.1),
                    DataError::EmptyCategory(which.into()),
                ))
            }
        }
    }
}
