//! Simulated trajectories through the CSV layer, pairing and labeling.

use ehmi_core::calibration::label_trajectories;
use ehmi_core::data_io::{parse_trajectories, write_trajectories, ExtractConfig, Frame, Movement, ParseOptions, RawTrajectory};
use ehmi_core::simulation::{simulate_encounter, IntersectionMap, ScenarioConfig, Trajectory};
use ehmi_core::{AStrategy, BStrategy, Defaults, Outcome};

fn raw(id: String, movement: Movement, traj: &Trajectory, shift: f64) -> RawTrajectory {
    let frames = (0..traj.samples.len())
        .map(|i| {
            let p = traj.reference_point(i);
            Frame {
                t: traj.samples[i].t + shift,
                x: p[0],
                y: p[1],
                v: Some(traj.samples[i].speed),
            }
        })
        .collect();
    RawTrajectory {
        vehicle_id: id,
        movement,
        frames,
    }
}

fn intention(accel: f64) -> bool {
    accel < Defaults::default().labeling.yield_threshold
}

#[test]
fn labels_recover_generated_intentions() {
    let d = Defaults::default();
    let map = IntersectionMap::default();
    let mut trajs = Vec::new();
    let mut expected = Vec::new();
    let cases = [(0.5, 0.5), (0.5, -1.0), (-1.0, 0.5), (-1.0, -1.0)];
    for (k, &(ah, aa)) in cases.iter().enumerate() {
        let cfg: ScenarioConfig = map.scenario((6.0, ah), (10.0, aa), [ah, ah], &d);
        let r = simulate_encounter(&cfg).unwrap();
        // Pairs are separated in time so only the intended ones meet.
        let shift = 100.0 * k as f64;
        trajs.push(raw(format!("hv{k}"), Movement::LeftTurn, &r.hv, shift));
        trajs.push(raw(format!("av{k}"), Movement::Straight, &r.av, shift));
        let a = if intention(ah) { AStrategy::Yield } else { AStrategy::Turn };
        let b = if intention(aa) { BStrategy::Yield } else { BStrategy::Drive };
        expected.push((format!("hv{k}-av{k}"), Outcome::new(a, b)));
    }

    let mut csv = Vec::new();
    write_trajectories(&mut csv, &trajs).unwrap();
    let parsed = parse_trajectories(csv.as_slice(), &ParseOptions::default()).unwrap();
    assert_eq!(parsed.len(), trajs.len());

    let (labeled, failed) = label_trajectories(&parsed, &ExtractConfig::from_defaults(&d), &d.labeling);
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(labeled.len(), cases.len());
    for (id, outcome) in expected {
        let got = labeled.iter().find(|l| l.source_id == id).unwrap_or_else(|| panic!("no pair {id}"));
        assert_eq!(got.observed, outcome, "{id}");
        // Onset lies before the conflict zone.
        let e = &got.encounter;
        assert!(e.a.dist_to_conflict > 0.0 && e.b.dist_to_conflict > 0.0);
    }
}

#[test]
fn shipped_scenarios_parse_and_run() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["av_first", "av_later"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let cfg = ScenarioConfig::parse_json(&text).unwrap();
        assert_eq!(cfg.name, name);
        let off = simulate_encounter(&cfg.with_deception(false)).unwrap();
        let on = simulate_encounter(&cfg.with_deception(true)).unwrap();
        assert!(on.pet > off.pet, "{name}: {} -> {}", off.pet, on.pet);
        assert_eq!(off.first, on.first);
    }
}
