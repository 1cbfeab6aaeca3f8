//! Artifact writers. Floats go out with 17 significant digits so that
//! downstream readers recover the exact binary values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use nonlocal_core::Trajectory;

use crate::error::CliError;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes a CSV file with the given header and preformatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// `t,x,u` rows, snapshot by snapshot.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,u")?;
    for state in traj.states() {
        let t = float(state.t());
        for (x, u) in state.iter() {
            writeln!(w, "{t},{},{}", float(x), float(u))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    t: &'a [f64],
    x: Vec<f64>,
    u: Vec<&'a [f64]>,
}

pub fn write_trajectory_json(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let doc = TrajectoryJson {
        t: traj.times(),
        x: traj.grid().points(),
        u: traj.states().iter().map(|s| s.values()).collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
