//! Two-vehicle runs under the stop-line protocol, with and without deception.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::path::{fit_path, Path};
use super::pet::{compute_pet, crossing_time, Pet};
use super::tracking::{Tracker, TrackerConfig, Trajectory};
use super::SimulationError;
use crate::config::{ControllerConfig, Defaults};
use crate::encounter::{ConflictGeometry, Encounter, Point};
use crate::kinematics::VehicleState;
use crate::payoff::Player;

/// Route and initial motion of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    /// Ordered path anchors from start to end.
    pub anchors: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_heading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_heading: Option<f64>,
    pub stop_line: Point,
    pub speed: f64,
    pub accel: f64,
}

impl VehicleSpec {
    pub fn path(&self) -> Result<Path, SimulationError> {
        fit_path(&self.anchors, self.start_heading, self.end_heading)
    }
}

/// Everything one simulated encounter depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Left-turning human driver.
    pub hv: VehicleSpec,
    /// Straight-going automated vehicle.
    pub av: VehicleSpec,
    pub conflict_point: Point,
    /// Both vehicles use this once either has passed the conflict point.
    pub post_conflict_accel: f64,
    /// HV acceleration after its stop line: `[without deception, with deception]`.
    pub hv_after_stop: [f64; 2],
    #[serde(default)]
    pub deception: bool,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
    #[serde(default = "default_controller")]
    pub controller: ControllerConfig,
}

fn default_step() -> f64 {
    Defaults::default().simulation.step
}
fn default_substeps() -> usize {
    Defaults::default().simulation.substeps
}
fn default_horizon() -> f64 {
    Defaults::default().simulation.horizon
}
fn default_wheelbase() -> f64 {
    Defaults::default().vehicle.wheelbase
}
fn default_controller() -> ControllerConfig {
    Defaults::default().controller
}

impl ScenarioConfig {
    pub fn parse_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn with_deception(&self, on: bool) -> Self {
        Self {
            deception: on,
            ..self.clone()
        }
    }

    fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            wheelbase: self.wheelbase,
            step: self.step,
            substeps: self.substeps,
            gains: self.controller,
        }
    }

    /// Onset states of both vehicles, measured along their fitted paths to
    /// the conflict zone.
    pub fn encounter(&self, defaults: &Defaults) -> Result<Encounter, SimulationError> {
        let h = defaults.vehicle.zone_half_extent;
        let len = defaults.vehicle.length;
        let state = |spec: &VehicleSpec| -> Result<(VehicleState, Point), SimulationError> {
            let path = spec.path()?;
            let s_c = path.arc_length_of(self.conflict_point);
            let d = s_c - h - len / 2.0;
            let st = VehicleState::new(spec.speed, spec.accel, d, d + 2.0 * h + len)
                .map_err(|e| SimulationError::BadInitialState(e.to_string()))?;
            Ok((st, path.pose_at(s_c - h).0))
        };
        let (a, entry_a) = state(&self.hv)?;
        let (b, entry_b) = state(&self.av)?;
        Ok(Encounter {
            id: if self.name.is_empty() { "scenario".into() } else { self.name.clone() },
            a,
            b,
            geometry: Some(ConflictGeometry {
                conflict_point: self.conflict_point,
                entry_a,
                entry_b,
                zone_extent: 2.0 * h,
            }),
        })
    }
}

/// The intersection used for sweeps: a northbound AV at x = 1.75 and a
/// southbound HV at x = -1.75 turning left (east) on a 13.75 m radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionMap {
    pub hv: VehicleSpec,
    pub av: VehicleSpec,
    pub conflict_point: Point,
}

impl IntersectionMap {
    pub fn standard(hv_start: f64, av_start: f64) -> Self {
        Self::sized(12.0, 1.75, hv_start, av_start)
    }

    /// Square box with stop lines `half` metres from the centre and lanes
    /// `lane` metres either side of the centreline. The HV turns on a
    /// radius of `half + lane` about the box corner.
    pub fn sized(half: f64, lane: f64, hv_start: f64, av_start: f64) -> Self {
        let (cx, cy, r) = (half, half, half + lane);
        let exit = half + 28.0;
        let mut hv_anchors = vec![[-lane, hv_start], [-lane, half]];
        // Arc anchors roughly 4 m apart keep the spline close to the circle.
        let n = (FRAC_PI_2 * r / 4.0).ceil().max(2.0) as usize;
        for k in 1..=n {
            let a = PI + FRAC_PI_2 * k as f64 / n as f64;
            hv_anchors.push([cx + r * a.cos(), cy + r * a.sin()]);
        }
        hv_anchors.push([exit, -lane]);
        let conflict_y = cy - (r * r - (lane - cx) * (lane - cx)).sqrt();
        Self {
            hv: VehicleSpec {
                anchors: hv_anchors,
                start_heading: Some(-FRAC_PI_2),
                end_heading: Some(0.0),
                stop_line: [-lane, half],
                speed: 0.0,
                accel: 0.0,
            },
            av: VehicleSpec {
                anchors: vec![[lane, -av_start], [lane, -half], [lane, exit]],
                start_heading: Some(FRAC_PI_2),
                end_heading: Some(FRAC_PI_2),
                stop_line: [lane, -half],
                speed: 0.0,
                accel: 0.0,
            },
            conflict_point: [lane, conflict_y],
        }
    }

    /// A `sized` map whose start points put the vehicles `d_hv` and `d_av`
    /// metres (front bumper to conflict zone, as in [`Encounter`]) from the
    /// zone. `None` when the HV would have to start inside the turn.
    pub fn placed(half: f64, lane: f64, d_hv: f64, d_av: f64, defaults: &Defaults) -> Option<Self> {
        let reach = defaults.vehicle.zone_half_extent + defaults.vehicle.length / 2.0;
        let probe = Self::sized(half, lane, half + 20.0, half + 20.0);
        let av_start = d_av + reach - probe.conflict_point[1];
        let mut lead = 20.0;
        // The fitted spline shifts slightly with the lead-in length; two
        // corrections bring the distance within millimetres.
        for _ in 0..3 {
            let path = Self::sized(half, lane, half + lead, av_start).hv.path().ok()?;
            let s_c = path.arc_length_of(probe.conflict_point);
            lead += d_hv + reach - s_c;
            if lead < 0.5 {
                return None;
            }
        }
        (av_start > 0.5 - probe.conflict_point[1]).then(|| Self::sized(half, lane, half + lead, av_start))
    }

    pub fn scenario(&self, hv: (f64, f64), av: (f64, f64), hv_after_stop: [f64; 2], defaults: &Defaults) -> ScenarioConfig {
        let with = |spec: &VehicleSpec, (v, a): (f64, f64)| VehicleSpec {
            speed: v,
            accel: a,
            ..spec.clone()
        };
        ScenarioConfig {
            name: String::new(),
            hv: with(&self.hv, hv),
            av: with(&self.av, av),
            conflict_point: self.conflict_point,
            post_conflict_accel: defaults.simulation.post_conflict_accel,
            hv_after_stop,
            deception: false,
            step: defaults.simulation.step,
            substeps: defaults.simulation.substeps,
            horizon: defaults.simulation.horizon,
            wheelbase: defaults.vehicle.wheelbase,
            controller: defaults.controller,
        }
    }
}

impl Default for IntersectionMap {
    fn default() -> Self {
        Self::standard(40.0, 45.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub hv: Trajectory,
    pub av: Trajectory,
    pub pet: f64,
    /// Who passed the conflict point first.
    pub first: Player,
    pub hv_crossing: f64,
    pub av_crossing: f64,
}

/// Run one encounter. Each vehicle holds its initial acceleration up to its
/// stop line; beyond it the HV switches to `hv_after_stop` and the AV keeps
/// its own. Once either vehicle has passed the conflict point both use
/// `post_conflict_accel`.
pub fn simulate_encounter(cfg: &ScenarioConfig) -> Result<SimulationResult, SimulationError> {
    let hv_path = cfg.hv.path()?;
    let av_path = cfg.av.path()?;
    let offset = cfg.wheelbase / 2.0;
    let tc = cfg.tracker_config();
    let mut hv = Tracker::at_start(&hv_path, cfg.hv.speed, tc);
    let mut av = Tracker::at_start(&av_path, cfg.av.speed, tc);
    let hv_stop = hv_path.arc_length_of(cfg.hv.stop_line);
    let hv_conf = hv_path.arc_length_of(cfg.conflict_point);
    let av_conf = av_path.arc_length_of(cfg.conflict_point);
    let after_stop = cfg.hv_after_stop[usize::from(cfg.deception)];
    // Both vehicles are followed this far past the conflict point.
    const RUN_OUT: f64 = 5.0;

    let steps = (cfg.horizon / cfg.step).round() as usize;
    for _ in 0..steps {
        let hs = hv.progress_ahead(offset);
        let as_ = av.progress_ahead(offset);
        if hs >= hv_conf + RUN_OUT && as_ >= av_conf + RUN_OUT {
            break;
        }
        let (ha, aa) = if hs >= hv_conf || as_ >= av_conf {
            (cfg.post_conflict_accel, cfg.post_conflict_accel)
        } else {
            (
                if hs < hv_stop { cfg.hv.accel } else { after_stop },
                cfg.av.accel,
            )
        };
        hv.advance(ha)?;
        av.advance(aa)?;
    }
    let hv = hv.into_trajectory(offset);
    let av = av.into_trajectory(offset);
    let hv_crossing = crossing_time(&hv, cfg.conflict_point)?;
    let av_crossing = crossing_time(&av, cfg.conflict_point)?;
    let Pet { value, first_crossed_first } = compute_pet(&hv, &av, cfg.conflict_point)?;
    Ok(SimulationResult {
        hv,
        av,
        pet: value,
        first: if first_crossed_first { Player::A } else { Player::B },
        hv_crossing,
        av_crossing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub without: SimulationResult,
    pub with: SimulationResult,
}

impl PairResult {
    pub fn pet_gain(&self) -> f64 {
        self.with.pet - self.without.pet
    }
}

/// The same scenario with deception off and on.
pub fn simulate_pair(cfg: &ScenarioConfig) -> Result<PairResult, SimulationError> {
    Ok(PairResult {
        without: simulate_encounter(&cfg.with_deception(false))?,
        with: simulate_encounter(&cfg.with_deception(true))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(hv: (f64, f64), av: (f64, f64), after: [f64; 2]) -> ScenarioConfig {
        let d = Defaults::default();
        IntersectionMap::default().scenario(hv, av, after, &d)
    }

    #[test]
    fn map_conflict_point_lies_on_both_paths() {
        let m = IntersectionMap::default();
        assert!((m.conflict_point[1] - (12.0 - 84f64.sqrt())).abs() < 1e-12);
        assert!(m.hv.path().unwrap().distance_to(m.conflict_point) < 0.05);
        assert!(m.av.path().unwrap().distance_to(m.conflict_point) < 1e-9);
    }

    #[test]
    fn placed_map_reproduces_distances() {
        let d = Defaults::default();
        let m = IntersectionMap::placed(12.0, 1.75, 18.0, 25.0, &d).unwrap();
        let e = m.scenario((8.0, 0.0), (10.0, 0.0), [-1.5, -2.5], &d).encounter(&d).unwrap();
        assert!((e.a.dist_to_conflict - 18.0).abs() < 0.01, "{}", e.a.dist_to_conflict);
        assert!((e.b.dist_to_conflict - 25.0).abs() < 1e-9);
        assert!(IntersectionMap::placed(12.0, 1.75, 2.0, 25.0, &d).is_none());
    }

    #[test]
    fn larger_box_moves_the_conflict_point() {
        let m = IntersectionMap::sized(24.0, 1.75, 32.0, 44.0);
        let r: f64 = 25.75;
        assert!((m.conflict_point[1] - (24.0 - (r * r - 22.25f64.powi(2)).sqrt())).abs() < 1e-12);
        assert!(m.hv.path().unwrap().distance_to(m.conflict_point) < 0.05);
    }

    #[test]
    fn deterministic_replay() {
        let cfg = scenario((8.0, 0.0), (10.0, 0.5), [-1.5, -2.5]);
        let a = simulate_encounter(&cfg).unwrap();
        let b = simulate_encounter(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn identical_kinematics_identical_runs() {
        let cfg = scenario((8.0, 0.0), (10.0, 0.5), [-1.5, -1.5]);
        let p = simulate_pair(&cfg).unwrap();
        assert_eq!(p.without.hv, p.with.hv);
        assert_eq!(p.without.av, p.with.av);
    }

    #[test]
    fn harder_braking_hv_widens_the_gap_when_av_leads() {
        let cfg = scenario((8.0, 0.0), (11.0, 0.5), [-1.5, -2.5]);
        let p = simulate_pair(&cfg).unwrap();
        assert_eq!(p.without.first, Player::B);
        assert_eq!(p.with.first, Player::B);
        assert!(p.pet_gain() > 0.0, "{} -> {}", p.without.pet, p.with.pet);
    }

    #[test]
    fn trajectories_are_kinematically_consistent() {
        let cfg = scenario((9.0, -0.5), (12.0, 0.0), [-1.5, -2.5]);
        let r = simulate_encounter(&cfg).unwrap();
        assert!(r.hv.speed_inconsistency() < 0.05);
        assert!(r.av.speed_inconsistency() < 0.05);
        assert!(r.hv.samples.iter().chain(&r.av.samples).all(|s| s.speed >= 0.0));
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let cfg = scenario((8.0, 0.0), (10.0, 0.5), [-1.5, -2.5]);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ScenarioConfig::parse_json(&text).unwrap(), cfg);
    }

    #[test]
    fn encounter_distances() {
        let d = Defaults::default();
        let cfg = scenario((8.0, 0.0), (10.0, 0.5), [-1.5, -2.5]);
        let e = cfg.encounter(&d).unwrap();
        // AV: straight from y = -45 to the conflict point.
        let expect = 45.0 + cfg.conflict_point[1] - d.vehicle.zone_half_extent - d.vehicle.length / 2.0;
        assert!((e.b.dist_to_conflict - expect).abs() < 1e-6);
        assert!((e.a.dist_through_conflict - e.a.dist_to_conflict - 8.0).abs() < 1e-9);
    }
}
