//! Payoffs of the four joint strategies for both players.
//!
//! Each payoff is a constant plus a slope on the player's own acceleration,
//! plus a slope on its collision-avoidance bound a_c when the opponent
//! proceeds first. Error terms are never sampled here; the game module
//! handles them through logit comparison probabilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encounter::{Encounter, Features};
use crate::kinematics::{KinematicsConfig, KinematicsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AStrategy {
    Turn,
    Yield,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BStrategy {
    Drive,
    Yield,
}

/// Joint strategy `o_ij`: A plays i (1 turn, 2 yield), B plays j (1 drive, 2 yield).
/// The declaration order is the fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "o11")]
    O11,
    #[serde(rename = "o12")]
    O12,
    #[serde(rename = "o21")]
    O21,
    #[serde(rename = "o22")]
    O22,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::O11, Outcome::O12, Outcome::O21, Outcome::O22];

    pub fn new(a: AStrategy, b: BStrategy) -> Self {
        match (a, b) {
            (AStrategy::Turn, BStrategy::Drive) => Outcome::O11,
            (AStrategy::Turn, BStrategy::Yield) => Outcome::O12,
            (AStrategy::Yield, BStrategy::Drive) => Outcome::O21,
            (AStrategy::Yield, BStrategy::Yield) => Outcome::O22,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn a_strategy(self) -> AStrategy {
        match self {
            Outcome::O11 | Outcome::O12 => AStrategy::Turn,
            Outcome::O21 | Outcome::O22 => AStrategy::Yield,
        }
    }

    pub fn b_strategy(self) -> BStrategy {
        match self {
            Outcome::O11 | Outcome::O21 => BStrategy::Drive,
            Outcome::O12 | Outcome::O22 => BStrategy::Yield,
        }
    }

    /// Two-digit code used in keys and files.
    pub fn code(self) -> &'static str {
        match self {
            Outcome::O11 => "11",
            Outcome::O12 => "12",
            Outcome::O21 => "21",
            Outcome::O22 => "22",
        }
    }

    /// Whether A's payoff carries the a_c term (B proceeds).
    pub fn a_has_bound(self) -> bool {
        self.b_strategy() == BStrategy::Drive
    }

    /// Whether B's payoff carries the a_c term (A proceeds).
    pub fn b_has_bound(self) -> bool {
        self.a_strategy() == AStrategy::Turn
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.code())
    }
}

impl FromStr for Outcome {
    type Err = PayoffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim().trim_start_matches(['o', 'O']);
        match code {
            "11" => Ok(Outcome::O11),
            "12" => Ok(Outcome::O12),
            "21" => Ok(Outcome::O21),
            "22" => Ok(Outcome::O22),
            _ => Err(PayoffError::UnknownOutcome(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

#[derive(Debug, Error)]
pub enum PayoffError {
    #[error("outcome {0} needs a collision-avoidance bound but none was given")]
    MissingAccelBound(Outcome),
    #[error("outcome {0} has no collision-avoidance term but a bound was given")]
    SpuriousAccelBound(Outcome),
    #[error("unknown outcome {0:?}")]
    UnknownOutcome(String),
    #[error("parameter file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("parameter file is missing key {0}")]
    MissingKey(&'static str),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Keys of the 20 coefficients, in storage order.
pub const PARAM_KEYS: [&str; 20] = [
    "alpha.11.0",
    "alpha.11.1",
    "alpha.11.2",
    "alpha.12.0",
    "alpha.12.1",
    "alpha.21.0",
    "alpha.21.1",
    "alpha.21.2",
    "alpha.22.0",
    "alpha.22.1",
    "beta.11.0",
    "beta.11.1",
    "beta.11.2",
    "beta.12.0",
    "beta.12.1",
    "beta.12.2",
    "beta.21.0",
    "beta.21.1",
    "beta.22.0",
    "beta.22.1",
];

// Offsets of each outcome's first coefficient within a player's block of 10.
const A_OFFSETS: [usize; 4] = [0, 3, 5, 8];
const B_OFFSETS: [usize; 4] = [0, 3, 6, 8];

const CALIBRATED: &str = include_str!("../config/calibrated.params");

/// The calibratable coefficients: α for player A, β for player B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffParams {
    values: [f64; 20],
}

impl PayoffParams {
    pub fn zeros() -> Self {
        Self { values: [0.0; 20] }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut v = [0.0; 20];
        v.copy_from_slice(values);
        Self { values: v }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// The shipped calibration (straight-going vehicle leads).
    pub fn calibrated() -> Self {
        Self::parse(CALIBRATED).expect("shipped parameter file parses")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut values = self.values;
        values.iter_mut().for_each(|v| *v *= factor);
        Self { values }
    }

    fn slot(player: Player, outcome: Outcome) -> usize {
        match player {
            Player::A => A_OFFSETS[outcome.index()],
            Player::B => 10 + B_OFFSETS[outcome.index()],
        }
    }

    fn has_bound(player: Player, outcome: Outcome) -> bool {
        match player {
            Player::A => outcome.a_has_bound(),
            Player::B => outcome.b_has_bound(),
        }
    }

    /// Coefficient `k` (0 constant, 1 own acceleration, 2 a_c) or `None`
    /// where the payoff has no such term.
    pub fn coef(&self, player: Player, outcome: Outcome, k: usize) -> Option<f64> {
        if k > 2 || (k == 2 && !Self::has_bound(player, outcome)) {
            return None;
        }
        Some(self.values[Self::slot(player, outcome) + k])
    }

    pub fn set_coef(&mut self, player: Player, outcome: Outcome, k: usize, value: f64) {
        assert!(k < 2 || (k == 2 && Self::has_bound(player, outcome)));
        self.values[Self::slot(player, outcome) + k] = value;
    }

    /// Deterministic payoff of `player` without any validation of the bound.
    #[inline]
    fn eval(&self, player: Player, outcome: Outcome, accel: f64, bound: f64) -> f64 {
        let i = Self::slot(player, outcome);
        let base = self.values[i] + self.values[i + 1] * accel;
        if Self::has_bound(player, outcome) {
            base + self.values[i + 2] * bound
        } else {
            base
        }
    }

    pub fn parse(text: &str) -> Result<Self, PayoffError> {
        let mut values = [f64::NAN; 20];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PayoffError::Parse {
                line: n + 1,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let idx = PARAM_KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| PayoffError::Parse {
                    line: n + 1,
                    msg: format!("unknown key {key:?}"),
                })?;
            values[idx] = value.trim().parse().map_err(|_| PayoffError::Parse {
                line: n + 1,
                msg: format!("bad number {:?}", value.trim()),
            })?;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(PayoffError::MissingKey(PARAM_KEYS[i]));
        }
        Ok(Self { values })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PayoffError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Flat `key = value` text; parses back to identical values.
    pub fn to_text(&self) -> String {
        PARAM_KEYS
            .iter()
            .zip(self.values.iter())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn to_map(&self) -> serde_json::Map<String, serde_json::Value> {
        PARAM_KEYS
            .iter()
            .zip(self.values.iter())
            .map(|(k, v)| (k.to_string(), serde_json::Value::from(*v)))
            .collect()
    }
}

impl Serialize for PayoffParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(20))?;
        for (k, v) in PARAM_KEYS.iter().zip(&self.values) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for PayoffParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = std::collections::BTreeMap::<String, f64>::deserialize(d)?;
        let mut values = [0.0; 20];
        for (slot, key) in values.iter_mut().zip(PARAM_KEYS) {
            *slot = *map
                .get(key)
                .ok_or_else(|| serde::de::Error::custom(format!("missing coefficient {key}")))?;
        }
        if let Some(k) = map.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
            return Err(serde::de::Error::custom(format!("unknown coefficient {k}")));
        }
        Ok(Self { values })
    }
}

impl Default for PayoffParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

fn check_bound(has: bool, outcome: Outcome, bound: Option<f64>) -> Result<f64, PayoffError> {
    match (has, bound) {
        (true, Some(b)) => Ok(b),
        (true, None) => Err(PayoffError::MissingAccelBound(outcome)),
        (false, Some(_)) => Err(PayoffError::SpuriousAccelBound(outcome)),
        (false, None) => Ok(0.0),
    }
}

/// Deterministic payoff of the left-turning vehicle A.
pub fn payoff_a(
    outcome: Outcome,
    accel_a: f64,
    bound_a: Option<f64>,
    params: &PayoffParams,
) -> Result<f64, PayoffError> {
    let bound = check_bound(outcome.a_has_bound(), outcome, bound_a)?;
    Ok(params.eval(Player::A, outcome, accel_a, bound))
}

/// Deterministic payoff of the straight-going vehicle B.
pub fn payoff_b(
    outcome: Outcome,
    accel_b: f64,
    bound_b: Option<f64>,
    params: &PayoffParams,
) -> Result<f64, PayoffError> {
    let bound = check_bound(outcome.b_has_bound(), outcome, bound_b)?;
    Ok(params.eval(Player::B, outcome, accel_b, bound))
}

/// Deterministic parts of all eight payoffs, indexed by [`Outcome::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityMatrix {
    pub a: [f64; 4],
    pub b: [f64; 4],
}

impl UtilityMatrix {
    pub fn from_features(features: &Features, params: &PayoffParams) -> Self {
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        for o in Outcome::ALL {
            a[o.index()] = params.eval(Player::A, o, features.accel_a, features.bound_a);
            b[o.index()] = params.eval(Player::B, o, features.accel_b, features.bound_b);
        }
        Self { a, b }
    }

    pub fn for_encounter(
        encounter: &Encounter,
        params: &PayoffParams,
        kin: &KinematicsConfig,
    ) -> Result<Self, KinematicsError> {
        Ok(Self::from_features(&encounter.features(kin)?, params))
    }

    #[inline]
    pub fn ua(&self, o: Outcome) -> f64 {
        self.a[o.index()]
    }

    #[inline]
    pub fn ub(&self, o: Outcome) -> f64 {
        self.b[o.index()]
    }

    pub fn total(&self, o: Outcome) -> f64 {
        self.ua(o) + self.ub(o)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a: self.a.map(|v| v * factor),
            b: self.b.map(|v| v * factor),
        }
    }
}

/// `U^A + U^B` of `outcome`, with a_c terms taken from the encounter kinematics.
pub fn total_payoff(
    encounter: &Encounter,
    outcome: Outcome,
    params: &PayoffParams,
    kin: &KinematicsConfig,
) -> Result<f64, PayoffError> {
    Ok(UtilityMatrix::for_encounter(encounter, params, kin)?.total(outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::VehicleState;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn calibrated_examples_for_a() {
        let p = PayoffParams::calibrated();
        assert!(close(payoff_a(Outcome::O11, 0.0, Some(0.0), &p).unwrap(), 0.954));
        assert!(close(payoff_a(Outcome::O22, 1.0, None, &p).unwrap(), 0.013));
        // 3.359 + 1.174 * 0.5 + 4.748 * 2
        assert!(close(payoff_a(Outcome::O21, 0.5, Some(2.0), &p).unwrap(), 13.442));
    }

    #[test]
    fn calibrated_examples_for_b() {
        let p = PayoffParams::calibrated();
        assert!(close(payoff_b(Outcome::O11, 0.0, Some(0.0), &p).unwrap(), 1.277));
        assert!(close(payoff_b(Outcome::O21, 1.0, None, &p).unwrap(), 6.404));
        assert!(close(payoff_b(Outcome::O22, 0.0, None, &p).unwrap(), 0.565));
    }

    #[test]
    fn bound_presence_is_checked() {
        let p = PayoffParams::calibrated();
        assert!(matches!(
            payoff_a(Outcome::O11, 0.0, None, &p),
            Err(PayoffError::MissingAccelBound(Outcome::O11))
        ));
        assert!(matches!(
            payoff_a(Outcome::O12, 0.0, Some(1.0), &p),
            Err(PayoffError::SpuriousAccelBound(Outcome::O12))
        ));
        assert!(matches!(
            payoff_b(Outcome::O21, 0.0, Some(1.0), &p),
            Err(PayoffError::SpuriousAccelBound(Outcome::O21))
        ));
        assert!(payoff_b(Outcome::O12, 0.0, Some(1.0), &p).is_ok());
    }

    #[test]
    fn coefficient_layout() {
        let p = PayoffParams::calibrated();
        assert_eq!(p.coef(Player::A, Outcome::O11, 2), Some(1.273));
        assert_eq!(p.coef(Player::A, Outcome::O12, 2), None);
        assert_eq!(p.coef(Player::A, Outcome::O21, 2), Some(4.748));
        assert_eq!(p.coef(Player::B, Outcome::O12, 2), Some(2.495));
        assert_eq!(p.coef(Player::B, Outcome::O21, 2), None);
        assert_eq!(p.coef(Player::B, Outcome::O22, 1), Some(1.030));
    }

    #[test]
    fn total_payoff_examples() {
        let a = VehicleState::new(8.0, 0.0, 20.0, 30.0).unwrap();
        let enc = Encounter::new("sym", a, a);
        let kin = KinematicsConfig::default();
        let total = total_payoff(&enc, Outcome::O22, &PayoffParams::calibrated(), &kin).unwrap();
        assert!(close(total, 1.810));
        for o in Outcome::ALL {
            assert_eq!(total_payoff(&enc, o, &PayoffParams::zeros(), &kin).unwrap(), 0.0);
        }
    }

    #[test]
    fn total_payoff_matches_hand_evaluation() {
        // Independent evaluation straight from the payoff formulas.
        let a = VehicleState::new(6.0, 0.8, 18.0, 32.0).unwrap();
        let b = VehicleState::new(11.0, -0.4, 25.0, 38.0).unwrap();
        let enc = Encounter::new("k", a, b);
        let t1_b = {
            let (v, acc, dd) = (11.0f64, -0.4f64, 38.0f64);
            (-v + (v * v + 2.0 * acc * dd).sqrt()) / acc
        };
        let ac_a = 2.0 * (18.0 - 6.0 * t1_b) / (t1_b * t1_b);
        let expected_a = 3.359 + 1.174 * 0.8 + 4.748 * ac_a;
        let expected_b = 3.435 + 2.969 * -0.4;
        let got = total_payoff(&enc, Outcome::O21, &PayoffParams::calibrated(), &KinematicsConfig::default())
            .unwrap();
        assert!((got - (expected_a + expected_b)).abs() < 1e-9);
    }

    #[test]
    fn param_file_errors() {
        assert!(matches!(
            PayoffParams::parse("alpha.11.0 = 1"),
            Err(PayoffError::MissingKey("alpha.11.1"))
        ));
        assert!(matches!(
            PayoffParams::parse("alpha.99.0 = 1"),
            Err(PayoffError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PayoffParams::parse("# c\nalpha.11.0 = x"),
            Err(PayoffError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn outcome_codes() {
        for o in Outcome::ALL {
            assert_eq!(o.to_string().parse::<Outcome>().unwrap(), o);
            assert_eq!(Outcome::new(o.a_strategy(), o.b_strategy()), o);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn params() -> impl Strategy<Value = PayoffParams> {
            proptest::collection::vec(-1e3..1e3f64, 20).prop_map(|v| PayoffParams::from_slice(&v))
        }

        proptest! {
            #[test]
            fn text_round_trip_is_exact(p in params()) {
                let text = p.to_text();
                let back = PayoffParams::parse(&text).unwrap();
                prop_assert_eq!(back.as_slice(), p.as_slice());
                prop_assert_eq!(back.to_text(), text);
            }

            #[test]
            fn slope_in_own_accel_is_alpha1(a in -3.0..3.0f64, bound in -5.0..5.0f64, o in 0usize..4) {
                let o = Outcome::ALL[o];
                let p = PayoffParams::calibrated();
                let bnd = o.a_has_bound().then_some(bound);
                let h = 1.0;
                let slope = payoff_a(o, a + h, bnd, &p).unwrap() - payoff_a(o, a, bnd, &p).unwrap();
                let alpha1 = p.coef(Player::A, o, 1).unwrap();
                prop_assert!((slope - alpha1).abs() < 1e-12 * (1.0 + a.abs() + bound.abs()) * 10.0);
            }

            #[test]
            fn unbounded_outcomes_ignore_opponent(vb in 0.5..15.0f64, ab in -1.0..2.0f64, db in 1.0..40.0f64) {
                let a = VehicleState::new(7.0, 0.3, 15.0, 27.0).unwrap();
                let b = VehicleState::new(vb, ab, db, db + 12.0).unwrap();
                let base = VehicleState::new(9.0, 0.0, 20.0, 32.0).unwrap();
                let p = PayoffParams::calibrated();
                let kin = KinematicsConfig { never_clears: crate::kinematics::NeverClearsPolicy::ZeroLimit, ..Default::default() };
                let u1 = UtilityMatrix::for_encounter(&Encounter::new("x", a, b), &p, &kin).unwrap();
                let u2 = UtilityMatrix::for_encounter(&Encounter::new("y", a, base), &p, &kin).unwrap();
                prop_assert_eq!(u1.ua(Outcome::O12), u2.ua(Outcome::O12));
                prop_assert_eq!(u1.ua(Outcome::O22), u2.ua(Outcome::O22));
            }
        }
    }
}
