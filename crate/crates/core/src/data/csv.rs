//! Dataset CSV: header `t,y1,…,y{n_y}`, one row per time point.
//!
//! Values are written with 17 significant digits so a write/read round trip
//! is exact. Error positions are 1-based file line and column numbers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};

pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            col: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "header must start with `t` followed by at least one observable".into(),
        });
    }
    let width = headers.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            col: 1,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::Parse {
                row: line,
                col: rec.len().min(width) + 1,
                msg: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                col: c + 1,
                msg: format!("`{field}` is not a number"),
            })?;
            if c == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let y = Array2::from_shape_vec((times.len(), width - 1), values)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Dataset::new(times, y, DatasetMeta::default())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file)
}

pub fn format_dataset(d: &Dataset) -> String {
    let mut out = String::from("t");
    for k in 1..=d.n_y() {
        out.push_str(&format!(",y{k}"));
    }
    out.push('\n');
    for (i, t) in d.times.iter().enumerate() {
        out.push_str(&format!("{t:.16e}"));
        for v in d.y.row(i) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(format_dataset(d).as_bytes())
        .map_err(|e| Error::io(path, e))
}
