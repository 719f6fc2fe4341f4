//! Intention labeling, maximum-likelihood fitting of the payoff coefficients
//! and prediction scoring.

mod labeling;
pub mod simplex;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use labeling::label_intention;
use simplex::{minimize, SimplexOptions};

use crate::config::LabelingConfig;
use crate::data_io::{build_encounter, pair_trajectories, DataError, ExtractConfig, RawTrajectory};
use crate::encounter::{Encounter, Features};
use crate::game::{distribution_from_utilities, DeltaRule, GameForm};
use crate::kinematics::{KinematicsConfig, KinematicsError};
use crate::payoff::{Outcome, PayoffParams, UtilityMatrix, PARAM_KEYS};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;
pub const MIN_ENCOUNTERS: usize = 20;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least {MIN_ENCOUNTERS} labeled encounters, got {0}")]
    TooFewEncounters(usize),
    #[error("prediction and observation counts differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate dataset: every label is {outcome}; the likelihood grows without bound along {direction}")]
    Degenerate { outcome: Outcome, direction: String },
    #[error("encounter {id}: {source}")]
    Kinematics {
        id: String,
        #[source]
        source: KinematicsError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEncounter {
    pub encounter: Encounter,
    pub observed: Outcome,
    pub source_id: String,
}

impl LabeledEncounter {
    pub fn new(encounter: Encounter, observed: Outcome) -> Self {
        Self {
            source_id: encounter.id.clone(),
            encounter,
            observed,
        }
    }
}

/// Pair, extract and label a whole trajectory set. Pairs that fail are
/// returned separately with the reason.
pub fn label_trajectories(
    trajs: &[RawTrajectory],
    extract: &ExtractConfig,
    labeling: &LabelingConfig,
) -> (Vec<LabeledEncounter>, Vec<(String, DataError)>) {
    let results: Vec<_> = pair_trajectories(trajs, extract)
        .into_par_iter()
        .map(|(i, j)| {
            let (a, b) = (&trajs[i], &trajs[j]);
            let id = format!("{}-{}", a.vehicle_id, b.vehicle_id);
            let labeled = build_encounter(a, b, extract).and_then(|e| {
                let conflict = e.geometry.map(|g| g.conflict_point);
                let o = label_intention(a, b, conflict, labeling, extract.smoothing_window)?;
                Ok(LabeledEncounter::new(e, o))
            });
            (id, labeled)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in results {
        match r {
            Ok(l) => ok.push(l),
            Err(e) => failed.push((id, e)),
        }
    }
    (ok, failed)
}

/// Fraction of o11 among encounters labeled o11 or o22; 0.5 without any.
pub fn estimate_delta(data: &[LabeledEncounter]) -> DeltaRule {
    let n11 = data.iter().filter(|l| l.observed == Outcome::O11).count();
    let n22 = data.iter().filter(|l| l.observed == Outcome::O22).count();
    if n11 + n22 == 0 {
        DeltaRule::default()
    } else {
        DeltaRule::new(n11 as f64 / (n11 + n22) as f64).expect("a fraction lies in [0, 1]")
    }
}

/// Payoff features of every encounter, in order.
pub fn features_of(
    data: &[LabeledEncounter],
    kin: &KinematicsConfig,
) -> Result<Vec<(Features, Outcome)>, CalibrationError> {
    data.par_iter()
        .map(|l| {
            l.encounter
                .features(kin)
                .map(|f| (f, l.observed))
                .map_err(|source| CalibrationError::Kinematics {
                    id: l.source_id.clone(),
                    source,
                })
        })
        .collect()
}

/// Log-likelihood over precomputed features. Terms are computed in
/// parallel and summed in input order.
pub fn log_likelihood_features(
    features: &[(Features, Outcome)],
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
) -> f64 {
    let terms: Vec<f64> = features
        .par_iter()
        .with_min_len(512)
        .map(|(f, o)| {
            let u = UtilityMatrix::from_features(f, params);
            distribution_from_utilities(&u, form, delta).prob(*o).max(PROB_FLOOR).ln()
        })
        .collect();
    terms.iter().sum()
}

pub fn log_likelihood(
    data: &[LabeledEncounter],
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<f64, CalibrationError> {
    if data.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    Ok(log_likelihood_features(&features_of(data, kin)?, params, form, delta))
}

/// Binary-error RMSE: each encounter scores 0 when predicted right, 1 otherwise.
pub fn rmse(predictions: &[Outcome], observations: &[Outcome]) -> Result<f64, CalibrationError> {
    Ok((1.0 - accuracy(predictions, observations)?).max(0.0).sqrt())
}

pub fn accuracy(predictions: &[Outcome], observations: &[Outcome]) -> Result<f64, CalibrationError> {
    if predictions.len() != observations.len() {
        return Err(CalibrationError::LengthMismatch(predictions.len(), observations.len()));
    }
    if predictions.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    let correct = predictions.iter().zip(observations).filter(|(p, o)| p == o).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Prediction quality of one game form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormEvaluation {
    pub form: GameForm,
    pub n: usize,
    pub rmse: f64,
    pub accuracy: f64,
    /// Mean probability of the predicted outcome among correct predictions.
    pub mean_winning_prob: f64,
    /// Those probabilities in ten bins of width 0.1.
    pub histogram: [usize; 10],
}

pub fn evaluate_features(
    features: &[(Features, Outcome)],
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
) -> Result<FormEvaluation, CalibrationError> {
    let scored: Vec<(Outcome, f64)> = features
        .par_iter()
        .map(|(f, _)| {
            let d = distribution_from_utilities(&UtilityMatrix::from_features(f, params), form, delta);
            let o = d.argmax();
            (o, d.prob(o))
        })
        .collect();
    let preds: Vec<Outcome> = scored.iter().map(|s| s.0).collect();
    let obs: Vec<Outcome> = features.iter().map(|f| f.1).collect();
    let mut histogram = [0usize; 10];
    let mut sum = 0.0;
    let mut correct = 0usize;
    for ((p, prob), o) in scored.iter().zip(&obs) {
        if p == o {
            histogram[((prob * 10.0) as usize).min(9)] += 1;
            sum += prob;
            correct += 1;
        }
    }
    Ok(FormEvaluation {
        form,
        n: preds.len(),
        rmse: rmse(&preds, &obs)?,
        accuracy: accuracy(&preds, &obs)?,
        mean_winning_prob: if correct > 0 { sum / correct as f64 } else { 0.0 },
        histogram,
    })
}

pub fn evaluate(
    data: &[LabeledEncounter],
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
    kin: &KinematicsConfig,
) -> Result<FormEvaluation, CalibrationError> {
    evaluate_features(&features_of(data, kin)?, params, form, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Optimiser starts: the initial point plus `restarts - 1` perturbations.
    pub restarts: usize,
    /// Half-width of the uniform perturbation applied to restarts.
    pub spread: f64,
    pub seed: u64,
    /// Further simplex runs from the incumbent until it stops improving.
    pub max_polish: usize,
    pub simplex: SimplexOptions,
    pub delta: DeltaRule,
    pub kinematics: KinematicsConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            spread: 0.5,
            seed: 0,
            max_polish: 5,
            simplex: SimplexOptions::default(),
            delta: DeltaRule::default(),
            kinematics: KinematicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub form: GameForm,
    pub params: PayoffParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub delta: f64,
    /// The fitted parameters scored under every form.
    pub rmse_per_form: BTreeMap<GameForm, f64>,
    pub accuracy_per_form: BTreeMap<GameForm, f64>,
}

fn check_dataset(data: &[LabeledEncounter]) -> Result<(), CalibrationError> {
    if data.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    if data.len() < MIN_ENCOUNTERS {
        return Err(CalibrationError::TooFewEncounters(data.len()));
    }
    let first = data[0].observed;
    if data.iter().all(|l| l.observed == first) {
        let code = &first.code()[1..];
        return Err(CalibrationError::Degenerate {
            outcome: first,
            direction: format!("+alpha.{code}.0 / +beta.{code}.0"),
        });
    }
    Ok(())
}

/// Maximise the log-likelihood of `data` under `form`, starting at `init`.
pub fn fit_mle(
    data: &[LabeledEncounter],
    form: GameForm,
    init: &PayoffParams,
    opts: &FitOptions,
) -> Result<CalibrationResult, CalibrationError> {
    check_dataset(data)?;
    let features = features_of(data, &opts.kinematics)?;
    let objective = |x: &[f64]| -log_likelihood_features(&features, &PayoffParams::from_slice(x), form, opts.delta);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = init.as_slice().to_vec();
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|k| {
            if k == 0 {
                x0.clone()
            } else {
                x0.iter().map(|v| v + rng.gen_range(-opts.spread..=opts.spread)).collect()
            }
        })
        .collect();
    let runs: Vec<_> = starts.par_iter().map(|s| minimize(objective, s, &opts.simplex)).collect();
    let mut iterations: usize = runs.iter().map(|r| r.iterations).sum();
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    for _ in 0..opts.max_polish {
        let r = minimize(objective, &best.x, &opts.simplex);
        iterations += r.iterations;
        let improved = r.value < best.value - opts.simplex.tol;
        if r.value <= best.value {
            best = r;
        }
        if !improved {
            break;
        }
    }

    let params = PayoffParams::from_slice(&best.x);
    let mut rmse_per_form = BTreeMap::new();
    let mut accuracy_per_form = BTreeMap::new();
    for f in GameForm::ALL {
        let ev = evaluate_features(&features, &params, f, opts.delta)?;
        rmse_per_form.insert(f, ev.rmse);
        accuracy_per_form.insert(f, ev.accuracy);
    }
    Ok(CalibrationResult {
        form,
        log_likelihood: -best.value,
        params,
        iterations,
        converged: best.converged,
        delta: opts.delta.value(),
        rmse_per_form,
        accuracy_per_form,
    })
}

/// Names of the coefficients, in the order of [`PayoffParams::as_slice`].
pub fn coefficient_names() -> &'static [&'static str] {
    &PARAM_KEYS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{NeverClearsPolicy, VehicleState};

    fn kin() -> KinematicsConfig {
        KinematicsConfig {
            never_clears: NeverClearsPolicy::ZeroLimit,
            ..Default::default()
        }
    }

    fn enc(i: usize) -> Encounter {
        let s = |v: f64, a: f64, d: f64| VehicleState::new(v, a, d, d + 8.0).unwrap();
        let x = i as f64;
        Encounter::new(
            format!("e{i}"),
            s(4.0 + (x * 0.7) % 6.0, -1.0 + (x * 0.37) % 2.0, 10.0 + (x * 3.1) % 20.0),
            s(6.0 + (x * 1.3) % 8.0, -1.5 + (x * 0.53) % 2.5, 12.0 + (x * 2.3) % 25.0),
        )
    }

    #[test]
    fn rmse_examples() {
        use Outcome::*;
        assert_eq!(rmse(&[O11, O12], &[O11, O12]).unwrap(), 0.0);
        assert_eq!(rmse(&[O11, O12], &[O22, O21]).unwrap(), 1.0);
        let obs = vec![O21; 1000];
        let mut pred = obs.clone();
        for p in pred.iter_mut().take(167) {
            *p = O12;
        }
        assert!((rmse(&pred, &obs).unwrap() - 0.409).abs() < 5e-4);
        assert!(matches!(rmse(&[O11], &[]), Err(CalibrationError::LengthMismatch(1, 0))));
    }

    #[test]
    fn delta_examples() {
        let l = |o| LabeledEncounter::new(enc(0), o);
        let d = estimate_delta(&[l(Outcome::O11), l(Outcome::O11), l(Outcome::O22)]);
        assert!((d.value() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(estimate_delta(&[l(Outcome::O12)]).value(), 0.5);
    }

    #[test]
    fn saturated_single_encounter_has_zero_likelihood_loss() {
        // A strong o21 preference for both players under B-first.
        let mut p = PayoffParams::zeros();
        p.set_coef(crate::payoff::Player::A, Outcome::O21, 0, 60.0);
        p.set_coef(crate::payoff::Player::B, Outcome::O21, 0, 60.0);
        let data = vec![LabeledEncounter::new(enc(1), Outcome::O21)];
        let ll = log_likelihood(&data, &p, GameForm::SequentialBFirst, DeltaRule::default(), &kin()).unwrap();
        assert!(ll.abs() < 1e-12, "{ll}");
    }

    #[test]
    fn likelihood_is_additive_and_matches_direct_sum() {
        let p = PayoffParams::calibrated();
        let one = vec![LabeledEncounter::new(enc(3), Outcome::O12)];
        let many = vec![one[0].clone(); 7];
        let f = GameForm::Simultaneous;
        let d = DeltaRule::default();
        let l1 = log_likelihood(&one, &p, f, d, &kin()).unwrap();
        let l7 = log_likelihood(&many, &p, f, d, &kin()).unwrap();
        assert!((l7 - 7.0 * l1).abs() < 1e-12);

        let data: Vec<_> = (0..10).map(|i| LabeledEncounter::new(enc(i), Outcome::ALL[i % 4])).collect();
        let mut direct = 0.0;
        for l in &data {
            let u = UtilityMatrix::for_encounter(&l.encounter, &p, &kin()).unwrap();
            let pr = crate::game::simultaneous_from_utilities(&u, d).prob(l.observed);
            direct += pr.max(PROB_FLOOR).ln();
        }
        assert!((log_likelihood(&data, &p, f, d, &kin()).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        let few: Vec<_> = (0..5).map(|i| LabeledEncounter::new(enc(i), Outcome::O11)).collect();
        let opts = FitOptions::default();
        let init = PayoffParams::zeros();
        assert!(matches!(
            fit_mle(&few, GameForm::SequentialBFirst, &init, &opts),
            Err(CalibrationError::TooFewEncounters(5))
        ));
        let same: Vec<_> = (0..25).map(|i| LabeledEncounter::new(enc(i), Outcome::O22)).collect();
        assert!(matches!(
            fit_mle(&same, GameForm::SequentialBFirst, &init, &opts),
            Err(CalibrationError::Degenerate { outcome: Outcome::O22, .. })
        ));
        assert!(matches!(
            log_likelihood(&[], &init, GameForm::Simultaneous, DeltaRule::default(), &kin()),
            Err(CalibrationError::EmptyDataset)
        ));
    }

    #[test]
    fn fit_never_loses_to_its_start() {
        let data: Vec<_> = (0..40)
            .map(|i| LabeledEncounter::new(enc(i), [Outcome::O21, Outcome::O12, Outcome::O21, Outcome::O11][i % 4]))
            .collect();
        let init = PayoffParams::calibrated();
        let opts = FitOptions {
            restarts: 2,
            kinematics: kin(),
            simplex: SimplexOptions {
                max_iter: 2000,
                ..Default::default()
            },
            ..Default::default()
        };
        let form = GameForm::SequentialBFirst;
        let r = fit_mle(&data, form, &init, &opts).unwrap();
        let l0 = log_likelihood(&data, &init, form, opts.delta, &kin()).unwrap();
        assert!(r.log_likelihood >= l0);
        assert!(r.log_likelihood <= 0.0);
        let again = fit_mle(&data, form, &init, &opts).unwrap();
        assert_eq!(r, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rmse_and_accuracy_are_complementary(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..200)) {
                let p: Vec<_> = pairs.iter().map(|x| Outcome::ALL[x.0]).collect();
                let o: Vec<_> = pairs.iter().map(|x| Outcome::ALL[x.1]).collect();
                let r = rmse(&p, &o).unwrap();
                let a = accuracy(&p, &o).unwrap();
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!((r * r + a - 1.0).abs() < 1e-12);
            }

            #[test]
            fn likelihood_ignores_order(seed in 0u64..1000) {
                let mut data: Vec<_> = (0..12).map(|i| LabeledEncounter::new(enc(i), Outcome::ALL[(i * 7) % 4])).collect();
                let p = PayoffParams::calibrated();
                let f = GameForm::SequentialAFirst;
                let a = log_likelihood(&data, &p, f, DeltaRule::default(), &kin()).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                use rand::seq::SliceRandom;
                data.shuffle(&mut rng);
                let b = log_likelihood(&data, &p, f, DeltaRule::default(), &kin()).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
