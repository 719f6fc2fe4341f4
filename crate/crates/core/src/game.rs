//! Equilibrium probabilities of the 2x2 left-turn game.
//!
//! Every inequality between two payoffs of one player is resolved by the
//! logit comparison `e^vi / (e^vi + e^vj)`. The inequalities combined in one
//! event always involve disjoint error terms, so joint probabilities are
//! products of pairwise factors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encounter::Encounter;
use crate::kinematics::{KinematicsConfig, KinematicsError};
use crate::payoff::{AStrategy, BStrategy, Outcome, PayoffParams, Player, UtilityMatrix};

/// Move order of the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameForm {
    #[serde(rename = "sim")]
    Simultaneous,
    #[serde(rename = "a-first")]
    SequentialAFirst,
    #[serde(rename = "b-first")]
    SequentialBFirst,
}

impl GameForm {
    pub const ALL: [GameForm; 3] = [
        GameForm::Simultaneous,
        GameForm::SequentialAFirst,
        GameForm::SequentialBFirst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GameForm::Simultaneous => "sim",
            GameForm::SequentialAFirst => "a-first",
            GameForm::SequentialBFirst => "b-first",
        }
    }

    pub fn leader(self) -> Option<Player> {
        match self {
            GameForm::Simultaneous => None,
            GameForm::SequentialAFirst => Some(Player::A),
            GameForm::SequentialBFirst => Some(Player::B),
        }
    }
}

impl fmt::Display for GameForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" | "simultaneous" => Ok(GameForm::Simultaneous),
            "a-first" => Ok(GameForm::SequentialAFirst),
            "b-first" => Ok(GameForm::SequentialBFirst),
            other => Err(format!("unknown game form {other:?} (sim|a-first|b-first)")),
        }
    }
}

/// Probability that o11 is selected when o11 and o22 are both equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRule {
    delta: f64,
}

impl DeltaRule {
    pub fn new(delta: f64) -> Result<Self, String> {
        if (0.0..=1.0).contains(&delta) {
            Ok(Self { delta })
        } else {
            Err(format!("delta must lie in [0, 1], got {delta}"))
        }
    }

    pub fn value(self) -> f64 {
        self.delta
    }
}

impl Default for DeltaRule {
    fn default() -> Self {
        Self { delta: 0.5 }
    }
}

/// Probability of each outcome being the equilibrium point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p: [f64; 4],
}

impl OutcomeDistribution {
    pub fn prob(&self, o: Outcome) -> f64 {
        self.p[o.index()]
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Most probable outcome; ties go to the earliest in o11 < o12 < o21 < o22.
    pub fn argmax(&self) -> Outcome {
        let mut best = Outcome::O11;
        for o in Outcome::ALL {
            if self.prob(o) > self.prob(best) {
                best = o;
            }
        }
        best
    }

    /// Copy scaled to sum to one, for display only.
    pub fn normalized(&self) -> Self {
        let s = self.sum();
        if s > 0.0 {
            Self {
                p: self.p.map(|x| x / s),
            }
        } else {
            *self
        }
    }
}

/// `e^vi / (e^vi + e^vj)` without overflow. `pairwise_prob(x, y) +
/// pairwise_prob(y, x)` is exactly 1.
#[inline]
pub fn pairwise_prob(v_i: f64, v_j: f64) -> f64 {
    let x = v_i - v_j;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        1.0 - 1.0 / (1.0 + x.exp())
    }
}

/// Simultaneous-move distribution.
///
/// Each outcome collects the sign patterns of the four best-response
/// inequalities under which it is a pure equilibrium. When o11 and o22 are
/// both equilibria the pattern is split δ / 1-δ; when o12 and o21 are both
/// equilibria it is split evenly. Patterns without any pure equilibrium are
/// excluded and the result is renormalised, so the distribution is the one
/// conditional on a pure equilibrium existing.
pub fn simultaneous_from_utilities(u: &UtilityMatrix, delta: DeltaRule) -> OutcomeDistribution {
    use Outcome::*;
    let d = delta.value();
    // A best-responds to B1 with A1; B to A1 with B1; A to B2 with A2; B to A2 with B2.
    let a1 = pairwise_prob(u.ua(O11), u.ua(O21));
    let b1 = pairwise_prob(u.ub(O11), u.ub(O12));
    let a2 = pairwise_prob(u.ua(O22), u.ua(O12));
    let b2 = pairwise_prob(u.ub(O22), u.ub(O21));

    let p11 = a1 * b1 * (1.0 - (1.0 - d) * a2 * b2);
    let p22 = a2 * b2 * (1.0 - d * a1 * b1);
    let p12 = (1.0 - a2) * (1.0 - b1) * (1.0 - 0.5 * (1.0 - a1) * (1.0 - b2));
    let p21 = (1.0 - a1) * (1.0 - b2) * (1.0 - 0.5 * (1.0 - a2) * (1.0 - b1));
    let total = p11 + p12 + p21 + p22;
    if total <= f64::MIN_POSITIVE {
        // Every error draw is a best-response cycle.
        return OutcomeDistribution { p: [0.25; 4] };
    }
    OutcomeDistribution {
        p: [p11 / total, p12 / total, p21 / total, p22 / total],
    }
}

/// Sequential-move distribution by backward induction with `leader` moving first.
pub fn stackelberg_from_utilities(u: &UtilityMatrix, leader: Player) -> OutcomeDistribution {
    use Outcome::*;
    match leader {
        Player::B => {
            // Follower A: turn after B1 with r1, turn after B2 with r2.
            let r1 = pairwise_prob(u.ua(O11), u.ua(O21));
            let r2 = pairwise_prob(u.ua(O12), u.ua(O22));
            let pb = |x: Outcome, y: Outcome| pairwise_prob(u.ub(x), u.ub(y));
            let p11 = r1 * (r2 * pb(O11, O12) + (1.0 - r2) * pb(O11, O22));
            let p21 = (1.0 - r1) * (r2 * pb(O21, O12) + (1.0 - r2) * pb(O21, O22));
            let p12 = r2 * (r1 * pb(O12, O11) + (1.0 - r1) * pb(O12, O21));
            let p22 = (1.0 - r2) * (r1 * pb(O22, O11) + (1.0 - r1) * pb(O22, O21));
            OutcomeDistribution {
                p: [p11, p12, p21, p22],
            }
        }
        Player::A => {
            // Follower B: drive after A1 with r1, drive after A2 with r2.
            let r1 = pairwise_prob(u.ub(O11), u.ub(O12));
            let r2 = pairwise_prob(u.ub(O21), u.ub(O22));
            let pa = |x: Outcome, y: Outcome| pairwise_prob(u.ua(x), u.ua(y));
            let p11 = r1 * (r2 * pa(O11, O21) + (1.0 - r2) * pa(O11, O22));
            let p12 = (1.0 - r1) * (r2 * pa(O12, O21) + (1.0 - r2) * pa(O12, O22));
            let p21 = r2 * (r1 * pa(O21, O11) + (1.0 - r1) * pa(O21, O12));
            let p22 = (1.0 - r2) * (r1 * pa(O22, O11) + (1.0 - r1) * pa(O22, O12));
            OutcomeDistribution {
                p: [p11, p12, p21, p22],
            }
        }
    }
}

pub fn distribution_from_utilities(
    u: &UtilityMatrix,
    form: GameForm,
    delta: DeltaRule,
) -> OutcomeDistribution {
    match form.leader() {
        None => simultaneous_from_utilities(u, delta),
        Some(leader) => stackelberg_from_utilities(u, leader),
    }
}

pub fn simultaneous_distribution(
    encounter: &Encounter,
    params: &PayoffParams,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<OutcomeDistribution, KinematicsError> {
    let u = UtilityMatrix::for_encounter(encounter, params, kin)?;
    Ok(simultaneous_from_utilities(&u, delta))
}

pub fn stackelberg_distribution(
    encounter: &Encounter,
    params: &PayoffParams,
    leader: Player,
    kin: &KinematicsConfig,
) -> Result<OutcomeDistribution, KinematicsError> {
    let u = UtilityMatrix::for_encounter(encounter, params, kin)?;
    Ok(stackelberg_from_utilities(&u, leader))
}

pub fn distribution(
    encounter: &Encounter,
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<OutcomeDistribution, KinematicsError> {
    let u = UtilityMatrix::for_encounter(encounter, params, kin)?;
    Ok(distribution_from_utilities(&u, form, delta))
}

/// Most probable outcome under `form`.
pub fn predict_outcome(
    encounter: &Encounter,
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<Outcome, KinematicsError> {
    Ok(distribution(encounter, params, form, delta, kin)?.argmax())
}

/// All pure Nash equilibria of the deterministic matrix, by exhaustive
/// best-response check (weak inequalities).
pub fn brute_force_equilibria(u: &UtilityMatrix) -> Vec<Outcome> {
    Outcome::ALL
        .into_iter()
        .filter(|&o| {
            let other_a = Outcome::new(flip_a(o.a_strategy()), o.b_strategy());
            let other_b = Outcome::new(o.a_strategy(), flip_b(o.b_strategy()));
            u.ua(o) >= u.ua(other_a) && u.ub(o) >= u.ub(other_b)
        })
        .collect()
}

/// Deterministic backward induction; ties resolve toward strategy 1.
pub fn backward_induction(u: &UtilityMatrix, leader: Player) -> Outcome {
    match leader {
        Player::B => {
            let reply = |b: BStrategy| {
                let turn = Outcome::new(AStrategy::Turn, b);
                let wait = Outcome::new(AStrategy::Yield, b);
                if u.ua(turn) >= u.ua(wait) {
                    turn
                } else {
                    wait
                }
            };
            let (drive, stay) = (reply(BStrategy::Drive), reply(BStrategy::Yield));
            if u.ub(drive) >= u.ub(stay) {
                drive
            } else {
                stay
            }
        }
        Player::A => {
            let reply = |a: AStrategy| {
                let drive = Outcome::new(a, BStrategy::Drive);
                let stay = Outcome::new(a, BStrategy::Yield);
                if u.ub(drive) >= u.ub(stay) {
                    drive
                } else {
                    stay
                }
            };
            let (turn, wait) = (reply(AStrategy::Turn), reply(AStrategy::Yield));
            if u.ua(turn) >= u.ua(wait) {
                turn
            } else {
                wait
            }
        }
    }
}

fn flip_a(s: AStrategy) -> AStrategy {
    match s {
        AStrategy::Turn => AStrategy::Yield,
        AStrategy::Yield => AStrategy::Turn,
    }
}

fn flip_b(s: BStrategy) -> BStrategy {
    match s {
        BStrategy::Drive => BStrategy::Yield,
        BStrategy::Yield => BStrategy::Drive,
    }
}
