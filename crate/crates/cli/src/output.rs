//! File writers and the matching loaders.
//!
//! JSON numbers carry 17 significant digits; non-finite values become
//! `null`. CSV floats use the shortest representation that round-trips.

use std::io::{self, Write};
use std::path::Path;

use nlprofile::contour::ContourCurve;
use nlprofile::profile::{BandPoint, PredictionMethod, ProfileTrace};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::data::{read_table, read_table_allow_inf, Table};
use crate::error::{CliError, Result};

/// Pretty JSON with every float written as `{:.16e}`.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Table {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let io_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `param_index, tau, theta_0 .. theta_{p-1}`.
pub fn write_trace_csv(path: &Path, trace: &ProfileTrace) -> Result<()> {
    let p = trace.points.first().map_or(0, |pt| pt.theta.len());
    let mut header = vec!["param_index".to_string(), "tau".to_string()];
    header.extend((0..p).map(|k| format!("theta_{k}")));
    write_rows(
        path,
        &header,
        trace.points.iter().map(|pt| {
            let mut row = vec![trace.index.to_string(), num(pt.tau)];
            row.extend(pt.theta.iter().map(|&t| num(t)));
            row
        }),
    )
}

/// `(param_index, [(tau, theta)])` read back from a trace CSV.
pub fn read_trace_csv(path: &Path) -> Result<(usize, Vec<(f64, Vec<f64>)>)> {
    let t = read_table(path)?;
    expect_columns(&t, path, &["param_index", "tau"])?;
    let index = t.rows[0][0] as usize;
    Ok((index, t.rows.iter().map(|r| (r[1], r[2..].to_vec())).collect()))
}

/// `pair_i, pair_j, alpha, point_index, theta_i, theta_j, extrapolated`.
pub fn write_contour_csv(path: &Path, curve: &ContourCurve) -> Result<()> {
    let header: Vec<String> = ["pair_i", "pair_j", "alpha", "point_index", "theta_i", "theta_j", "extrapolated"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_rows(
        path,
        &header,
        curve.points.iter().enumerate().map(|(k, &(a, b))| {
            vec![
                curve.i.to_string(),
                curve.j.to_string(),
                num(curve.alpha),
                k.to_string(),
                num(a),
                num(b),
                u8::from(curve.extrapolated).to_string(),
            ]
        }),
    )
}

pub fn read_contour_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let t = read_table(path)?;
    expect_columns(&t, path, &["pair_i", "pair_j", "alpha", "point_index", "theta_i", "theta_j", "extrapolated"])?;
    Ok(t.rows.iter().map(|r| (r[4], r[5])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Expectation,
    Full,
}

pub fn method_flag(m: PredictionMethod) -> &'static str {
    match m {
        PredictionMethod::Profile => "profile",
        PredictionMethod::LinearFallback => "linear_fallback",
    }
}

/// `x…, center, linear_lo, linear_hi, profile_lo, profile_hi, method`.
/// The method column is 0 for profile, 1 for linear fallback so the file
/// stays numeric.
pub fn write_band_csv(path: &Path, vars: &[String], band: &[BandPoint], kind: BandKind) -> Result<()> {
    let mut header: Vec<String> = vars.to_vec();
    header.extend(["center", "linear_lo", "linear_hi", "profile_lo", "profile_hi", "method"].map(String::from));
    write_rows(
        path,
        &header,
        band.iter().map(|b| {
            let (lin, prof) = match kind {
                BandKind::Expectation => (b.linear_expectation, b.profile_expectation),
                BandKind::Full => (b.linear_full, b.profile_full),
            };
            let mut row: Vec<String> = b.x.iter().map(|&v| num(v)).collect();
            row.extend([b.center, lin.0, lin.1, prof.0, prof.1].map(num));
            row.push(u8::from(b.method == PredictionMethod::LinearFallback).to_string());
            row
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub x: Vec<f64>,
    pub center: f64,
    pub linear: (f64, f64),
    pub profile: (f64, f64),
    pub fallback: bool,
}

pub fn read_band_csv(path: &Path) -> Result<Vec<BandRow>> {
    let t = read_table_allow_inf(path)?;
    let n_vars = t.headers.len().saturating_sub(6);
    expect_columns(&t, path, &[])?;
    if t.headers[n_vars..] != ["center", "linear_lo", "linear_hi", "profile_lo", "profile_hi", "method"] {
        return Err(CliError::Table { path: path.to_path_buf(), line: 1, message: "not a band file".into() });
    }
    Ok(t.rows
        .iter()
        .map(|r| BandRow {
            x: r[..n_vars].to_vec(),
            center: r[n_vars],
            linear: (r[n_vars + 1], r[n_vars + 2]),
            profile: (r[n_vars + 3], r[n_vars + 4]),
            fallback: r[n_vars + 5] != 0.0,
        })
        .collect())
}

fn expect_columns(t: &Table, path: &Path, leading: &[&str]) -> Result<()> {
    if t.headers.len() < leading.len() || t.headers[..leading.len()] != *leading {
        return Err(CliError::Table {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected columns starting with {leading:?}, found {:?}", t.headers),
        });
    }
    Ok(())
}

/// Write a plain numeric table (used by `gen-kotanchek`).
pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    write_rows(path, &table.headers, table.rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()))
}
