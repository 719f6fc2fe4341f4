//! Grid over the initial speeds and accelerations of both vehicles.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{simulate_pair, IntersectionMap};
use crate::config::Defaults;
use crate::disclosure::{decide, deception_success, BeliefModel};
use crate::game::DeltaRule;
use crate::kinematics::KinematicsConfig;
use crate::payoff::{Outcome, PayoffParams};
use crate::round3;

/// `steps` evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub hv_speed: Axis,
    pub hv_accel: Axis,
    pub av_speed: Axis,
    pub av_accel: Axis,
    #[serde(default)]
    pub map: Option<IntersectionMap>,
}

impl GridSpec {
    pub fn parse_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Cells in row-major order: HV speed, HV accel, AV speed, AV accel.
    pub fn cells(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for vh in self.hv_speed.values() {
            for ah in self.hv_accel.values() {
                for va in self.av_speed.values() {
                    for aa in self.av_accel.values() {
                        out.push([vh, ah, va, aa]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub hv_speed: f64,
    pub hv_accel: f64,
    pub av_speed: f64,
    pub av_accel: f64,
    pub expected: Option<Outcome>,
    pub baseline: Option<Outcome>,
    pub disclose: bool,
    /// The deceptive display alone would realise the expected outcome.
    pub deception_feasible: bool,
    /// The plan actually relies on deception.
    pub deception_success: bool,
    pub pet_without: Option<f64>,
    pub pet_with: Option<f64>,
    pub skipped: Option<String>,
}

impl SweepCell {
    /// Success cell whose simulated PET did not improve.
    pub fn closure_failed(&self) -> bool {
        self.deception_success
            && match (self.pet_without, self.pet_with) {
                (Some(a), Some(b)) => b <= a,
                _ => true,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassSummary {
    pub count: usize,
    pub share: f64,
    pub mean_hv_speed: f64,
    pub mean_hv_accel: f64,
    pub mean_av_speed: f64,
    pub mean_av_accel: f64,
    pub mean_pet_without: f64,
    pub mean_pet_with: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub disclosures: usize,
    pub successes: usize,
    pub success_share: f64,
    /// Expected o21: the AV passes first.
    pub av_first: ClassSummary,
    /// Expected o12: the AV passes later.
    pub av_later: ClassSummary,
    pub closure_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub summary: SweepSummary,
}

pub struct SweepInputs<'a> {
    pub params: &'a PayoffParams,
    pub beliefs: &'a BeliefModel,
    pub delta: DeltaRule,
    pub kinematics: &'a KinematicsConfig,
    pub defaults: &'a Defaults,
    /// Run the deception on/off simulations for success cells.
    pub simulate: bool,
}

fn evaluate_cell(map: &IntersectionMap, c: [f64; 4], inp: &SweepInputs) -> SweepCell {
    let mut cell = SweepCell {
        hv_speed: c[0],
        hv_accel: c[1],
        av_speed: c[2],
        av_accel: c[3],
        expected: None,
        baseline: None,
        disclose: false,
        deception_feasible: false,
        deception_success: false,
        pet_without: None,
        pet_with: None,
        skipped: None,
    };
    let sim = &inp.defaults.simulation;
    let mut scenario = map.scenario((c[0], c[1]), (c[2], c[3]), sim.hv_after_stop_av_first, inp.defaults);
    let plan = match scenario
        .encounter(inp.defaults)
        .map_err(|e| e.to_string())
        .and_then(|e| {
            let plan = decide(&e, inp.params, inp.beliefs, inp.delta, inp.kinematics).map_err(|e| e.to_string())?;
            let feasible = deception_success(&e, inp.params, plan.expected_outcome, inp.beliefs, inp.kinematics)
                .map_err(|e| e.to_string())?;
            Ok((plan, feasible))
        }) {
        Ok(p) => p,
        Err(msg) => {
            cell.skipped = Some(msg);
            return cell;
        }
    };
    let (plan, feasible) = plan;
    cell.expected = Some(plan.expected_outcome);
    cell.baseline = Some(plan.baseline_outcome);
    cell.disclose = plan.disclose;
    cell.deception_feasible = feasible;
    cell.deception_success = plan.deception_success;
    if plan.deception_success && inp.simulate {
        if plan.expected_outcome == Outcome::O12 {
            scenario.hv_after_stop = sim.hv_after_stop_av_later;
        }
        match simulate_pair(&scenario) {
            Ok(p) => {
                cell.pet_without = Some(p.without.pet);
                cell.pet_with = Some(p.with.pet);
            }
            Err(e) => cell.skipped = Some(format!("simulation: {e}")),
        }
    }
    cell
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn sweep_initial_states(grid: &GridSpec, inputs: &SweepInputs) -> SweepReport {
    let map = grid.map.clone().unwrap_or_default();
    let cells: Vec<SweepCell> = grid
        .cells()
        .into_par_iter()
        .map(|c| evaluate_cell(&map, c, inputs))
        .collect();
    let evaluated = cells.iter().filter(|c| c.expected.is_some()).count();
    let share = |n: usize| if evaluated == 0 { 0.0 } else { n as f64 / evaluated as f64 };
    let class = |o: Outcome| {
        let m: Vec<&SweepCell> = cells
            .iter()
            .filter(|c| c.deception_success && c.expected == Some(o))
            .collect();
        ClassSummary {
            count: m.len(),
            share: share(m.len()),
            mean_hv_speed: mean(m.iter().map(|c| c.hv_speed)),
            mean_hv_accel: mean(m.iter().map(|c| c.hv_accel)),
            mean_av_speed: mean(m.iter().map(|c| c.av_speed)),
            mean_av_accel: mean(m.iter().map(|c| c.av_accel)),
            mean_pet_without: mean(m.iter().filter_map(|c| c.pet_without)),
            mean_pet_with: mean(m.iter().filter_map(|c| c.pet_with)),
        }
    };
    let successes = cells.iter().filter(|c| c.deception_success).count();
    let summary = SweepSummary {
        cells: cells.len(),
        evaluated,
        skipped: cells.iter().filter(|c| c.skipped.is_some()).count(),
        disclosures: cells.iter().filter(|c| c.disclose).count(),
        successes,
        success_share: share(successes),
        av_first: class(Outcome::O21),
        av_later: class(Outcome::O12),
        closure_failures: if inputs.simulate {
            cells.iter().filter(|c| c.closure_failed()).count()
        } else {
            0
        },
    };
    SweepReport { cells, summary }
}

pub const SWEEP_HEADER: [&str; 12] = [
    "hv_speed",
    "hv_accel",
    "av_speed",
    "av_accel",
    "expected",
    "baseline",
    "disclose",
    "deception_feasible",
    "deception_success",
    "pet_without",
    "pet_with",
    "skipped",
];

pub fn write_sweep_csv<W: Write>(w: W, cells: &[SweepCell]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    let f = |x: f64| format!("{:.3}", round3(x));
    let o = |x: Option<Outcome>| x.map(|o| o.to_string()).unwrap_or_default();
    for c in cells {
        out.write_record([
            f(c.hv_speed),
            f(c.hv_accel),
            f(c.av_speed),
            f(c.av_accel),
            o(c.expected),
            o(c.baseline),
            c.disclose.to_string(),
            c.deception_feasible.to_string(),
            c.deception_success.to_string(),
            c.pet_without.map(f).unwrap_or_default(),
            c.pet_with.map(f).unwrap_or_default(),
            c.skipped.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
