//! Encounter-level interchange: one row per interaction at onset.

use std::io::{Read, Write};

use super::DataError;
use crate::encounter::Encounter;
use crate::kinematics::VehicleState;
use crate::payoff::Outcome;

pub const ENCOUNTER_HEADER: [&str; 10] = [
    "id", "label", "v_a", "a_a", "d_a", "dd_a", "v_b", "a_b", "d_b", "dd_b",
];

/// Rows are `(encounter, optional intention label)`.
pub fn read_encounters<R: Read>(reader: R) -> Result<Vec<(Encounter, Option<Outcome>)>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(String::is_empty) {
        return Err(DataError::EmptyFile);
    }
    if !header.iter().map(String::as_str).eq(ENCOUNTER_HEADER) {
        return Err(DataError::SchemaMismatch(format!(
            "expected encounter header {}",
            ENCOUNTER_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        let num = |i: usize| -> Result<f64, DataError> {
            let s = rec.get(i).unwrap_or("");
            s.parse().map_err(|_| DataError::Row {
                line,
                msg: format!("non-numeric {} {s:?}", ENCOUNTER_HEADER[i]),
            })
        };
        let state = |base: usize| -> Result<VehicleState, DataError> {
            VehicleState::new(num(base)?, num(base + 1)?, num(base + 2)?, num(base + 3)?).map_err(
                |e| DataError::Row {
                    line,
                    msg: e.to_string(),
                },
            )
        };
        let label = match rec.get(1).unwrap_or("") {
            "" => None,
            s => Some(s.parse::<Outcome>().map_err(|e| DataError::Row {
                line,
                msg: e.to_string(),
            })?),
        };
        out.push((Encounter::new(rec.get(0).unwrap_or(""), state(2)?, state(6)?), label));
    }
    if out.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(out)
}

pub fn write_encounters<W: Write>(
    writer: W,
    rows: &[(Encounter, Option<Outcome>)],
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ENCOUNTER_HEADER)?;
    for (e, label) in rows {
        let s = |x: f64| x.to_string();
        w.write_record([
            e.id.clone(),
            label.map(|o| o.to_string()).unwrap_or_default(),
            s(e.a.velocity),
            s(e.a.acceleration),
            s(e.a.dist_to_conflict),
            s(e.a.dist_through_conflict),
            s(e.b.velocity),
            s(e.b.acceleration),
            s(e.b.dist_to_conflict),
            s(e.b.dist_through_conflict),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = VehicleState::new(6.5, -0.25, 12.0, 21.0).unwrap();
        let b = VehicleState::new(10.1, 0.5, 30.0, 39.5).unwrap();
        let rows = vec![
            (Encounter::new("e1", a, b), Some(Outcome::O21)),
            (Encounter::new("e2", b, a), None),
        ];
        let mut buf = Vec::new();
        write_encounters(&mut buf, &rows).unwrap();
        let back = read_encounters(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn invalid_state_reports_line() {
        let text = format!("{}\ne1,o11,5,0,10,8,5,0,10,20\n", ENCOUNTER_HEADER.join(","));
        match read_encounters(text.as_bytes()) {
            Err(DataError::Row { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
