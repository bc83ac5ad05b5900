//! Snapshot files.
//!
//! One-dimensional states are CSV with header `z,re,im` (plus `pi_re,pi_im`
//! when a time derivative is present). Three-dimensional states start with a
//! single JSON header line followed by little-endian 64-bit floats: the field
//! as interleaved `re, im` pairs in storage order (z fastest), then the time
//! derivative in the same layout when `has_pi` is set.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid, GridState};
use crate::error::{Error, Result};

const MAGIC: &str = "boostfield-grid";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    points: [usize; 3],
    extent: [f64; 3],
    t: f64,
    step_count: usize,
    has_pi: bool,
    byte_order: String,
    dtype: String,
}

fn format_err(what: &str, detail: impl ToString) -> Error {
    Error::Format {
        what: what.into(),
        detail: detail.to_string(),
    }
}

pub fn write_snapshot(path: &Path, state: &GridState) -> Result<()> {
    if state.grid.dim() == 1 {
        write_csv(path, state)
    } else {
        write_binary(path, state)
    }
}

/// Reads either format, chosen by the `.csv` extension. CSV snapshots carry
/// no clock, so the state restarts at `t = 0`.
pub fn read_snapshot(path: &Path) -> Result<GridState> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_csv(path)
    } else {
        read_binary(path)
    }
}

fn write_csv(path: &Path, state: &GridState) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err("snapshot", e))?;
    let header: &[&str] = if state.pi.is_some() {
        &["z", "re", "im", "pi_re", "pi_im"]
    } else {
        &["z", "re", "im"]
    };
    w.write_record(header).map_err(|e| format_err("snapshot", e))?;
    for (i, f) in state.field.iter().enumerate() {
        let mut row = vec![state.grid.coords(i)[2].to_string(), f.re.to_string(), f.im.to_string()];
        if let Some(pi) = &state.pi {
            row.push(pi[i].re.to_string());
            row.push(pi[i].im.to_string());
        }
        w.write_record(&row).map_err(|e| format_err("snapshot", e))?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<GridState> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_err("snapshot", e))?;
    let headers = r.headers().map_err(|e| format_err("snapshot", e))?.clone();
    let has_pi = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["z", "re", "im"] => false,
        ["z", "re", "im", "pi_re", "pi_im"] => true,
        other => return Err(format_err("snapshot header", format!("{other:?}"))),
    };
    let mut z = vec![];
    let mut field = vec![];
    let mut pi = vec![];
    for rec in r.records() {
        let rec = rec.map_err(|e| format_err("snapshot", e))?;
        let v = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| format_err("snapshot value", e)))
            .collect::<Result<Vec<f64>>>()?;
        z.push(v[0]);
        field.push(Complex64::new(v[1], v[2]));
        if has_pi {
            pi.push(Complex64::new(v[3], v[4]));
        }
    }
    if z.len() < 2 {
        return Err(format_err("snapshot", "fewer than 2 rows"));
    }
    let dz = z[1] - z[0];
    let grid = Grid::new_1d(z.len(), dz * z.len() as f64)?;
    for (i, zi) in z.iter().enumerate() {
        if (zi - grid.coords(i)[2]).abs() > 1e-9 * grid.extent()[2] {
            return Err(format_err("snapshot", format!("row {i} is not on a centred uniform grid")));
        }
    }
    GridState::new(grid, field, has_pi.then_some(pi), 0.0)
}

fn write_binary(path: &Path, state: &GridState) -> Result<()> {
    let header = Header {
        format: MAGIC.into(),
        version: 1,
        points: state.grid.points(),
        extent: state.grid.extent(),
        t: state.t,
        step_count: state.step_count,
        has_pi: state.pi.is_some(),
        byte_order: "little".into(),
        dtype: "f64".into(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header).map_err(|e| format_err("snapshot header", e))?;
    w.write_all(b"\n")?;
    for values in std::iter::once(&state.field).chain(state.pi.as_ref()) {
        for v in values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_binary(path: &Path) -> Result<GridState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| format_err("snapshot header", e))?;
    if header.format != MAGIC || header.version != 1 || header.byte_order != "little" || header.dtype != "f64" {
        return Err(format_err("snapshot header", line.trim_end()));
    }
    let grid = Grid::new_3d(header.points, header.extent)?;
    let mut read_block = || -> Result<Vec<Complex64>> {
        let mut bytes = vec![0u8; grid.len() * 16];
        r.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect())
    };
    let field = read_block()?;
    let pi = if header.has_pi { Some(read_block()?) } else { None };
    let mut state = GridState::new(grid, field, pi, header.t)?;
    state.step_count = header.step_count;
    Ok(state)
}
