//! Whether, when and what the AV should display, and when a deliberately
//! misleading display is the one that produces the jointly best outcome.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::BeliefDefaults;
use crate::encounter::Encounter;
use crate::game::{predict_outcome, DeltaRule, GameForm};
use crate::kinematics::{KinematicsConfig, KinematicsError};
use crate::payoff::{AStrategy, BStrategy, Outcome, PayoffParams, UtilityMatrix};
use crate::round3;

/// What the AV displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    /// "I want to proceed first."
    Rush,
    /// "I want to yield."
    Yield,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::Rush => "rush",
            Signal::Yield => "yield",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Signal::Rush => Signal::Yield,
            Signal::Yield => Signal::Rush,
        }
    }

    /// The display that honestly announces `b`.
    pub fn announcing(b: BStrategy) -> Self {
        match b {
            BStrategy::Drive => Signal::Rush,
            BStrategy::Yield => Signal::Yield,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Leader,
    Follower,
}

/// Acceleration the HV attributes to the AV after seeing each display, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefModel {
    pub rush: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

impl BeliefModel {
    pub fn new(rush: f64, yield_: f64) -> Result<Self, String> {
        if !(rush.is_finite() && yield_.is_finite()) {
            return Err("belief accelerations must be finite".into());
        }
        if yield_ >= rush {
            return Err(format!("yield belief {yield_} must be below rush belief {rush}"));
        }
        Ok(Self { rush, yield_ })
    }

    pub fn accel(&self, s: Signal) -> f64 {
        match s {
            Signal::Rush => self.rush,
            Signal::Yield => self.yield_,
        }
    }
}

impl From<BeliefDefaults> for BeliefModel {
    fn from(d: BeliefDefaults) -> Self {
        Self {
            rush: d.rush,
            yield_: d.yield_,
        }
    }
}

impl Default for BeliefModel {
    fn default() -> Self {
        crate::Defaults::default().beliefs.into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosurePlan {
    pub encounter_id: String,
    pub disclose: bool,
    /// Absent when nothing is displayed.
    pub timing: Option<Timing>,
    pub signal: Option<Signal>,
    pub truthful: bool,
    pub expected_outcome: Outcome,
    pub baseline_outcome: Outcome,
    pub predicted_actual_outcome: Outcome,
    pub deception_success: bool,
    /// False when no display realises the expected outcome.
    pub signal_effective: bool,
}

/// Outcome with the highest total payoff; ties go to the earlier outcome.
pub fn expected_strategy(
    encounter: &Encounter,
    params: &PayoffParams,
    kin: &KinematicsConfig,
) -> Result<Outcome, KinematicsError> {
    let u = UtilityMatrix::for_encounter(encounter, params, kin)?;
    Ok(argmax_total(&u))
}

fn argmax_total(u: &UtilityMatrix) -> Outcome {
    let mut best = Outcome::O11;
    for o in Outcome::ALL {
        if u.total(o) > u.total(best) {
            best = o;
        }
    }
    best
}

/// Predicted outcome without any display: the AV moves first.
pub fn baseline_outcome(
    encounter: &Encounter,
    params: &PayoffParams,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<Outcome, KinematicsError> {
    predict_outcome(encounter, params, GameForm::SequentialBFirst, delta, kin)
}

/// The HV's choice once it attributes `believed_av_accel` to the AV: the
/// HV side of the most probable outcome of the AV-leads game, with the AV's
/// acceleration replaced everywhere it enters (own payoff terms and both
/// collision-avoidance bounds).
pub fn hv_best_response(
    encounter: &Encounter,
    params: &PayoffParams,
    believed_av_accel: f64,
    kin: &KinematicsConfig,
) -> Result<AStrategy, KinematicsError> {
    let perceived = encounter.with_b_acceleration(believed_av_accel);
    let o = predict_outcome(&perceived, params, GameForm::SequentialBFirst, DeltaRule::default(), kin)?;
    Ok(o.a_strategy())
}

/// Whether displaying the opposite of the AV's intent makes the HV act as
/// `expected` requires. Only o12 and o21 admit this, and never when the
/// expected outcome happens anyway.
pub fn deception_success(
    encounter: &Encounter,
    params: &PayoffParams,
    expected: Outcome,
    beliefs: &BeliefModel,
    kin: &KinematicsConfig,
) -> Result<bool, KinematicsError> {
    if !matches!(expected, Outcome::O12 | Outcome::O21) {
        return Ok(false);
    }
    if baseline_outcome(encounter, params, DeltaRule::default(), kin)? == expected {
        return Ok(false);
    }
    let false_signal = Signal::announcing(expected.b_strategy()).opposite();
    let response = hv_best_response(encounter, params, beliefs.accel(false_signal), kin)?;
    Ok(response == expected.a_strategy())
}

/// Full three-stage decision for one encounter.
pub fn decide(
    encounter: &Encounter,
    params: &PayoffParams,
    beliefs: &BeliefModel,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<DisclosurePlan, KinematicsError> {
    let expected = expected_strategy(encounter, params, kin)?;
    let baseline = baseline_outcome(encounter, params, delta, kin)?;
    let mut plan = DisclosurePlan {
        encounter_id: encounter.id.clone(),
        disclose: false,
        timing: None,
        signal: None,
        truthful: true,
        expected_outcome: expected,
        baseline_outcome: baseline,
        predicted_actual_outcome: baseline,
        deception_success: false,
        signal_effective: true,
    };
    if expected == baseline {
        return Ok(plan);
    }
    plan.disclose = true;
    plan.timing = Some(Timing::Leader);

    let honest = Signal::announcing(expected.b_strategy());
    let respond = |s: Signal| hv_best_response(encounter, params, beliefs.accel(s), kin);
    let honest_reply = respond(honest)?;
    let realised = |a: AStrategy| Outcome::new(a, expected.b_strategy());

    if honest_reply == expected.a_strategy() {
        plan.signal = Some(honest);
        plan.predicted_actual_outcome = expected;
        return Ok(plan);
    }
    if matches!(expected, Outcome::O12 | Outcome::O21) {
        let lie = honest.opposite();
        if respond(lie)? == expected.a_strategy() {
            plan.signal = Some(lie);
            plan.truthful = false;
            plan.deception_success = true;
            plan.predicted_actual_outcome = expected;
            return Ok(plan);
        }
    }
    plan.signal = Some(honest);
    plan.signal_effective = false;
    plan.predicted_actual_outcome = realised(honest_reply);
    Ok(plan)
}

/// Which player gains when the display moves the game to the expected outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainCategory {
    AUpBDown,
    ADownBUp,
    BothUp,
    Other,
}

impl GainCategory {
    fn of(da: f64, db: f64) -> Self {
        match (da > 0.0, db > 0.0, da < 0.0, db < 0.0) {
            (true, false, _, true) => GainCategory::AUpBDown,
            (false, true, true, _) => GainCategory::ADownBUp,
            (true, true, _, _) => GainCategory::BothUp,
            _ => GainCategory::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GainCategory::AUpBDown => "a-up-b-down",
            GainCategory::ADownBUp => "a-down-b-up",
            GainCategory::BothUp => "both-up",
            GainCategory::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub plan: DisclosurePlan,
    pub baseline_total: f64,
    pub ehmi_total: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    /// Present only where the display raises the total payoff.
    pub category: Option<GainCategory>,
}

impl CensusRow {
    pub fn improved(&self) -> bool {
        self.category.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategorySummary {
    pub count: usize,
    pub mean_delta_a: f64,
    pub mean_delta_b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CensusSummary {
    pub encounters: usize,
    pub skipped: usize,
    pub improved: usize,
    pub improved_share: f64,
    pub mean_baseline_total: f64,
    pub mean_ehmi_total: f64,
    pub mean_improvement: f64,
    pub a_up_b_down: CategorySummary,
    pub a_down_b_up: CategorySummary,
    pub both_up: CategorySummary,
    pub truthful_disclosures: usize,
    pub deceptions: usize,
    pub deceptions_expected_o21: usize,
    pub deceptions_expected_o12: usize,
    pub no_effective_signal: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CensusReport {
    pub rows: Vec<CensusRow>,
    /// Encounter ids whose kinematics could not be evaluated, with the reason.
    pub skipped: Vec<(String, String)>,
    pub summary: CensusSummary,
}

fn census_row(
    e: &Encounter,
    params: &PayoffParams,
    beliefs: &BeliefModel,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<CensusRow, KinematicsError> {
    let plan = decide(e, params, beliefs, delta, kin)?;
    let u = UtilityMatrix::for_encounter(e, params, kin)?;
    let (base, exp) = (plan.baseline_outcome, plan.expected_outcome);
    let improved = plan.disclose && u.total(exp) > u.total(base);
    let (delta_a, delta_b) = if improved {
        (u.ua(exp) - u.ua(base), u.ub(exp) - u.ub(base))
    } else {
        (0.0, 0.0)
    };
    Ok(CensusRow {
        baseline_total: u.total(base),
        ehmi_total: if improved { u.total(exp) } else { u.total(base) },
        delta_a,
        delta_b,
        category: improved.then(|| GainCategory::of(delta_a, delta_b)),
        plan,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Decide every encounter and aggregate the payoff changes. Means of totals
/// are taken over the improved encounters.
pub fn ehmi_gain_census(
    data: &[Encounter],
    params: &PayoffParams,
    beliefs: &BeliefModel,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> CensusReport {
    let results: Vec<_> = data
        .par_iter()
        .map(|e| census_row(e, params, beliefs, delta, kin).map_err(|err| (e.id.clone(), err.to_string())))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(s) => skipped.push(s),
        }
    }
    let improved: Vec<&CensusRow> = rows.iter().filter(|r| r.improved()).collect();
    let cat = |c: GainCategory| {
        let members: Vec<&&CensusRow> = improved.iter().filter(|r| r.category == Some(c)).collect();
        CategorySummary {
            count: members.len(),
            mean_delta_a: mean(members.iter().map(|r| r.delta_a)),
            mean_delta_b: mean(members.iter().map(|r| r.delta_b)),
        }
    };
    let deceptions = |o: Option<Outcome>| {
        rows.iter()
            .filter(|r| r.plan.deception_success && o.map_or(true, |o| r.plan.expected_outcome == o))
            .count()
    };
    let summary = CensusSummary {
        encounters: rows.len(),
        skipped: skipped.len(),
        improved: improved.len(),
        improved_share: if rows.is_empty() { 0.0 } else { improved.len() as f64 / rows.len() as f64 },
        mean_baseline_total: mean(improved.iter().map(|r| r.baseline_total)),
        mean_ehmi_total: mean(improved.iter().map(|r| r.ehmi_total)),
        mean_improvement: mean(improved.iter().map(|r| r.ehmi_total - r.baseline_total)),
        a_up_b_down: cat(GainCategory::AUpBDown),
        a_down_b_up: cat(GainCategory::ADownBUp),
        both_up: cat(GainCategory::BothUp),
        truthful_disclosures: rows.iter().filter(|r| r.plan.disclose && r.plan.truthful).count(),
        deceptions: deceptions(None),
        deceptions_expected_o21: deceptions(Some(Outcome::O21)),
        deceptions_expected_o12: deceptions(Some(Outcome::O12)),
        no_effective_signal: rows.iter().filter(|r| !r.plan.signal_effective).count(),
    };
    CensusReport { rows, skipped, summary }
}

pub const PLAN_HEADER: [&str; 15] = [
    "id",
    "disclose",
    "timing",
    "signal",
    "truthful",
    "expected",
    "baseline",
    "predicted_actual",
    "deception_success",
    "signal_effective",
    "baseline_total",
    "ehmi_total",
    "delta_a",
    "delta_b",
    "category",
];

/// One row per encounter, numbers at three decimals.
pub fn write_census_csv<W: Write>(w: W, rows: &[CensusRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PLAN_HEADER)?;
    let f = |x: f64| format!("{:.3}", round3(x));
    for r in rows {
        let p = &r.plan;
        out.write_record([
            p.encounter_id.clone(),
            p.disclose.to_string(),
            p.timing.map_or("", |t| match t {
                Timing::Leader => "leader",
                Timing::Follower => "follower",
            })
            .to_string(),
            p.signal.map_or("", Signal::as_str).to_string(),
            p.truthful.to_string(),
            p.expected_outcome.to_string(),
            p.baseline_outcome.to_string(),
            p.predicted_actual_outcome.to_string(),
            p.deception_success.to_string(),
            p.signal_effective.to_string(),
            f(r.baseline_total),
            f(r.ehmi_total),
            f(r.delta_a),
            f(r.delta_b),
            r.category.map_or("", GainCategory::as_str).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
