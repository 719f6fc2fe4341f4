use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, Frame, Movement, RawTrajectory};

pub const CANONICAL_HEADER: [&str; 6] = ["t", "x", "y", "v", "vehicle_id", "movement"];

/// Column layout detected from a header row.
#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    Canonical,
    /// Any header whose columns map onto the canonical fields through
    /// common aliases (`frame`, `track_id`, `speed`, ...).
    Aliased {
        time: usize,
        time_is_frame: bool,
        x: usize,
        y: usize,
        speed: Option<usize>,
        id: usize,
        movement: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Used when the time column counts frames.
    pub frame_rate: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { frame_rate: 30.0 }
    }
}

fn find(header: &[String], names: &[&str]) -> Option<usize> {
    header
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

pub fn detect_schema(header: &[String]) -> Result<Schema, DataError> {
    if header.iter().map(String::as_str).eq(CANONICAL_HEADER) {
        return Ok(Schema::Canonical);
    }
    let missing = |what: &str| {
        DataError::SchemaMismatch(format!(
            "no {what} column in header [{}]; expected {}",
            header.join(","),
            CANONICAL_HEADER.join(",")
        ))
    };
    let (time, time_is_frame) = match find(header, &["t", "time", "timestamp", "time_s"]) {
        Some(i) => (i, false),
        None => (
            find(header, &["frame", "frame_id", "frameid"]).ok_or_else(|| missing("time"))?,
            true,
        ),
    };
    Ok(Schema::Aliased {
        time,
        time_is_frame,
        x: find(header, &["x", "pos_x", "center_x", "xcenter", "local_x"]).ok_or_else(|| missing("x"))?,
        y: find(header, &["y", "pos_y", "center_y", "ycenter", "local_y"]).ok_or_else(|| missing("y"))?,
        speed: find(header, &["v", "speed", "velocity", "vel"]),
        id: find(header, &["vehicle_id", "id", "track_id", "trackid", "vehicle", "veh_id"])
            .ok_or_else(|| missing("vehicle id"))?,
        movement: find(header, &["movement", "type", "direction", "move", "maneuver"])
            .ok_or_else(|| missing("movement"))?,
    })
}

pub fn read_trajectories(path: &Path, opts: &ParseOptions) -> Result<Vec<RawTrajectory>, DataError> {
    parse_trajectories(std::fs::File::open(path)?, opts)
}

/// Parse a trajectory file. Frames are grouped per vehicle in order of first
/// appearance; malformed rows are reported with their 1-based line number.
pub fn parse_trajectories<R: Read>(reader: R, opts: &ParseOptions) -> Result<Vec<RawTrajectory>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::EmptyFile);
    }
    let schema = detect_schema(&header)?;
    let (ti, frame, xi, yi, vi, idi, mi) = match schema {
        Schema::Canonical => (0, false, 1, 2, Some(3), 4, 5),
        Schema::Aliased {
            time,
            time_is_frame,
            x,
            y,
            speed,
            id,
            movement,
        } => (time, time_is_frame, x, y, speed, id, movement),
    };

    let mut out: Vec<RawTrajectory> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (n, record) in rdr.records().enumerate() {
        let line = n + 2;
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64, DataError> {
            let s = field(i);
            let v: f64 = s.parse().map_err(|_| DataError::Row {
                line,
                msg: format!("non-numeric {name} {s:?}"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(DataError::Row {
                    line,
                    msg: format!("non-finite {name}"),
                })
            }
        };
        let mut t = num(ti, "time")?;
        if frame {
            t /= opts.frame_rate;
        }
        let v = match vi {
            Some(i) if !field(i).is_empty() => {
                let v = num(i, "speed")?;
                if v < 0.0 {
                    return Err(DataError::Row {
                        line,
                        msg: format!("negative speed {v}"),
                    });
                }
                Some(v)
            }
            _ => None,
        };
        let frame = Frame {
            t,
            x: num(xi, "x")?,
            y: num(yi, "y")?,
            v,
        };
        let id = field(idi).to_string();
        if id.is_empty() {
            return Err(DataError::Row {
                line,
                msg: "empty vehicle_id".into(),
            });
        }
        let movement = Movement::parse(field(mi)).ok_or_else(|| DataError::Row {
            line,
            msg: format!("unknown movement {:?}", field(mi)),
        })?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            out.push(RawTrajectory {
                vehicle_id: id.clone(),
                movement,
                frames: Vec::new(),
            });
            out.len() - 1
        });
        let traj = &mut out[slot];
        if traj.movement != movement {
            return Err(DataError::Row {
                line,
                msg: format!("vehicle {id} changes movement"),
            });
        }
        if let Some(prev) = traj.frames.last() {
            if frame.t < prev.t {
                return Err(DataError::Row {
                    line,
                    msg: format!("time goes backwards for vehicle {id}"),
                });
            }
        }
        traj.frames.push(frame);
    }
    if out.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(out)
}

/// Write trajectories in the canonical schema. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_trajectories<W: Write>(writer: W, trajectories: &[RawTrajectory]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_HEADER)?;
    for traj in trajectories {
        for f in &traj.frames {
            w.write_record([
                f.t.to_string(),
                f.x.to_string(),
                f.y.to_string(),
                f.v.map(|v| v.to_string()).unwrap_or_default(),
                traj.vehicle_id.clone(),
                traj.movement.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
