//! Synthetic encounters shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;

use ehmi_core::data_io::write_encounters;
use ehmi_core::game::distribution;
use ehmi_core::{DeltaRule, Encounter, GameForm, KinematicsConfig, Outcome, PayoffParams, VehicleState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn kin() -> KinematicsConfig {
    ehmi_core::Defaults::default().kinematics
}

pub fn random_encounter(rng: &mut ChaCha8Rng, id: usize) -> Encounter {
    let mut state = |vmax: f64, dmax: f64| {
        let d = rng.gen_range(5.0..dmax);
        VehicleState::new(rng.gen_range(2.0..vmax), rng.gen_range(-2.0..2.0), d, d + 8.0).unwrap()
    };
    let a = state(12.0, 30.0);
    let b = state(15.0, 40.0);
    Encounter::new(format!("e{id}"), a, b)
}

/// Draw an outcome from the model's distribution under `form`.
pub fn sample_outcome(
    rng: &mut ChaCha8Rng,
    e: &Encounter,
    params: &PayoffParams,
    form: GameForm,
    delta: DeltaRule,
) -> Outcome {
    let d = distribution(e, params, form, delta, &kin()).unwrap();
    let total: f64 = d.p.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for o in Outcome::ALL {
        u -= d.prob(o);
        if u < 0.0 {
            return o;
        }
    }
    Outcome::O22
}

pub fn labeled_set(rng: &mut ChaCha8Rng, n: usize, params: &PayoffParams, form: GameForm) -> Vec<(Encounter, Option<Outcome>)> {
    (0..n)
        .map(|i| {
            let e = random_encounter(rng, i);
            let o = sample_outcome(rng, &e, params, form, DeltaRule::default());
            (e, Some(o))
        })
        .collect()
}

pub fn write_set(path: &Path, rows: &[(Encounter, Option<Outcome>)]) {
    write_encounters(std::fs::File::create(path).unwrap(), rows).unwrap();
}
