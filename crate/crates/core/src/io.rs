//! JSONL trajectory files: one header line, then one line per event.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory trajectory bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bps::{Event, Trajectory, TrajectoryHeader};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: TrajectoryHeader,
    duration: f64,
    events: usize,
}

pub fn write_trajectory<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<()> {
    let head = HeaderLine {
        header: trajectory.header.clone(),
        duration: trajectory.duration,
        events: trajectory.events.len(),
    };
    serde_json::to_writer(&mut out, &head)?;
    out.write_all(b"\n")?;
    for e in &trajectory.events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut lines = input.lines();
    let first = lines.next().ok_or(Error::EmptyTrajectory)??;
    let head: HeaderLine = serde_json::from_str(&first)?;
    let mut events = Vec::with_capacity(head.events);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Event = serde_json::from_str(&line)?;
        if e.x.len() != head.header.d || e.v.len() != head.header.d {
            return Err(Error::DimensionMismatch {
                expected: head.header.d,
                got: e.x.len().max(e.v.len()),
            });
        }
        events.push(e);
    }
    if events.len() != head.events {
        return Err(Error::Corrupt(format!(
            "header announces {} events, file holds {}",
            head.events,
            events.len()
        )));
    }
    Ok(Trajectory {
        header: head.header,
        events,
        duration: head.duration,
    })
}

pub fn save_trajectory(trajectory: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory(trajectory, BufWriter::new(File::create(path)?))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(BufReader::new(File::open(path)?))
}
