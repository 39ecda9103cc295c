//! Table and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use crate::conformal::PredictionRegion;
use crate::data::Dataset;
use crate::{Error, Result};

/// Four significant digits with a signed two-digit exponent, e.g.
/// `1.000e+01`. Non-finite values print as `NA`, `Inf` or `-Inf`.
pub fn sci4(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let s = format!("{v:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn full(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.17e}")
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn lookup(times: &[f64], t: f64) -> Option<usize> {
    let tol = 1e-9 * t.abs().max(1.0);
    times.iter().position(|&s| (s - t).abs() <= tol)
}

/// Write one `t,y,x_nom,lpb,upb` table per observable as
/// `<stem>_y{k}.csv` plus a full-precision `<stem>_y{k}.full.csv`.
///
/// `observed` values are matched by time; `nominal` must be on the region
/// grid. Missing entries are written as `NA`.
pub fn write_region_tables(
    dir: &Path,
    stem: &str,
    region: &PredictionRegion,
    observed: Option<&Dataset>,
    nominal: Option<&Array2<f64>>,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    if let Some(nom) = nominal {
        if nom.dim() != region.lpb.dim() {
            return Err(Error::DimensionMismatch(format!(
                "nominal trajectory {:?} vs region {:?}",
                nom.dim(),
                region.lpb.dim()
            )));
        }
    }
    let mut written = Vec::new();
    for k in 0..region.n_y() {
        let mut short = String::from("t,y,x_nom,lpb,upb\n");
        let mut long = short.clone();
        for (i, &t) in region.times.iter().enumerate() {
            let y = observed
                .and_then(|d| lookup(&d.times, t).map(|r| d.y[[r, k]]))
                .unwrap_or(f64::NAN);
            let x = nominal.map_or(f64::NAN, |n| n[[i, k]]);
            let row = [t, y, x, region.lpb[[i, k]], region.upb[[i, k]]];
            short.push_str(&row.map(sci4).join(","));
            short.push('\n');
            long.push_str(&row.map(full).join(","));
            long.push('\n');
        }
        let p = dir.join(format!("{stem}_y{}.csv", k + 1));
        write_text(&p, &short)?;
        written.push(p);
        let p = dir.join(format!("{stem}_y{}.full.csv", k + 1));
        write_text(&p, &long)?;
        written.push(p);
    }
    Ok(written)
}
