//! Diagnostics and snapshot CSV files.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{DiagnosticsRow, SimulationResult};
use crate::model::{center, Configuration};

pub const DIAGNOSTICS_HEADER: [&str; 10] = [
    "t",
    "dt",
    "F",
    "U",
    "W",
    "f2",
    "fmp1",
    "min_gap",
    "H",
    "newton_iters",
];

/// Shortest representation that parses back to the same double.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn write_diagnostics_csv(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DIAGNOSTICS_HEADER)?;
    for r in rows {
        let mut rec: Vec<String> = [
            r.t,
            r.dt,
            r.energy,
            r.internal,
            r.interaction,
            r.f2,
            r.fmp1,
            r.min_gap,
            r.h_of_y,
        ]
        .iter()
        .map(|v| format_f64(*v))
        .collect();
        rec.push(r.newton_iters.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Snapshot file with header `t,x1,...,xN`. `n` sets the header width when there are no rows.
pub fn write_snapshots_csv(snapshots: &[(f64, Configuration)], n: usize, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let n = snapshots.first().map_or(n, |(_, c)| c.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header)?;
    for (t, c) in snapshots {
        let rec: Vec<String> = std::iter::once(*t)
            .chain(c.iter().copied())
            .map(format_f64)
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `diagnostics` and `snapshots` CSV files for a run.
pub fn write_trajectory_csv(result: &SimulationResult, diagnostics: &Path, snapshots: &Path) -> Result<()> {
    write_diagnostics_csv(&result.rows, diagnostics)?;
    write_snapshots_csv(&result.snapshots, result.model.n, snapshots)
}

fn parse_field(s: &str, line: usize, column: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        column,
        message: format!("invalid number {s:?}: {e}"),
    })
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().has_headers(true).from_path(path)?)
}

/// Reads a snapshot file. Positions must be increasing; rows that are not centered to the
/// configuration tolerance are re-centered.
pub fn read_snapshots_csv(path: &Path) -> Result<Vec<(f64, Configuration)>> {
    let mut r = reader(path)?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("t") || header.len() < 3 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "expected header t,x1,...,xN with N >= 2".into(),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, s)| parse_field(s, line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        let pos = vals[1..].to_vec();
        let cfg = match Configuration::new(pos.clone()) {
            Ok(c) => c,
            Err(_) => center(&pos).map_err(|e| Error::Parse {
                line,
                column: 2,
                message: e.to_string(),
            })?,
        };
        out.push((vals[0], cfg));
    }
    Ok(out)
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != DIAGNOSTICS_HEADER {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("expected header {}", DIAGNOSTICS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let f = |c: usize| parse_field(&rec[c], line, c + 1);
        let iters = rec[9].trim().parse::<usize>().map_err(|e| Error::Parse {
            line,
            column: 10,
            message: e.to_string(),
        })?;
        out.push(DiagnosticsRow {
            t: f(0)?,
            dt: f(1)?,
            energy: f(2)?,
            internal: f(3)?,
            interaction: f(4)?,
            f2: f(5)?,
            fmp1: f(6)?,
            min_gap: f(7)?,
            h_of_y: f(8)?,
            newton_iters: iters,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for v in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-300,
            5e-324,
            1.7976931348623157e308,
            -2.5e-7,
            123456.789,
            1e16,
        ] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.05), "0.05");
        assert_eq!(format_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("d.csv");
        let s = dir.path().join("s.csv");
        write_diagnostics_csv(&[], &d).unwrap();
        write_snapshots_csv(&[], 3, &s).unwrap();
        assert_eq!(
            std::fs::read_to_string(&d).unwrap(),
            "t,dt,F,U,W,f2,fmp1,min_gap,H,newton_iters\n"
        );
        assert_eq!(std::fs::read_to_string(&s).unwrap(), "t,x1,x2,x3\n");
        assert!(read_snapshots_csv(&s).unwrap().is_empty());
        assert!(read_diagnostics_csv(&d).unwrap().is_empty());
    }
}
