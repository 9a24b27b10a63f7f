//! Field snapshots, time series and run summaries.
//!
//! Snapshots use the legacy VTK structured-points ASCII format with a fixed
//! number format, so identical fields give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::Macroscopic;

fn num(out: &mut String, v: f64) {
    // `{:e}` prints "-0e0" for negative zero; normalize it away
    let v = if v == 0.0 { 0.0 } else { v };
    let _ = write!(out, "{v:.9e}");
}

/// Legacy VTK text for `rho`, `u` and optionally `phi`.
pub fn vtk_string(m: &Macroscopic, phi: Option<&[f64]>, title: &str) -> String {
    let d = m.dims;
    let n = d.nodes();
    let mut s = String::with_capacity(64 * n);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", d.nx, d.ny, d.nz);
    let _ = writeln!(s, "ORIGIN 0 0 0\nSPACING 1 1 1\nPOINT_DATA {n}");
    let _ = writeln!(s, "SCALARS rho double 1\nLOOKUP_TABLE default");
    for &r in &m.rho {
        num(&mut s, r);
        s.push('\n');
    }
    let _ = writeln!(s, "VECTORS u double");
    for u in &m.u {
        num(&mut s, u[0]);
        s.push(' ');
        num(&mut s, u[1]);
        s.push(' ');
        num(&mut s, u[2]);
        s.push('\n');
    }
    if let Some(phi) = phi {
        let _ = writeln!(s, "SCALARS phi double 1\nLOOKUP_TABLE default");
        for &p in phi {
            num(&mut s, p);
            s.push('\n');
        }
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_vtk(path: impl AsRef<Path>, m: &Macroscopic, phi: Option<&[f64]>, title: &str) -> Result<()> {
    write_text(path.as_ref(), &vtk_string(m, phi, title))
}

/// Columns of scalar samples, one row per sampling time.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, &v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                num(&mut s, v);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path.as_ref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Dims;

    fn uniform(dims: Dims) -> Macroscopic {
        Macroscopic {
            dims,
            rho: vec![1.0; dims.nodes()],
            u: vec![[0.01, -0.0, 0.0]; dims.nodes()],
        }
    }

    #[test]
    fn header_and_counts() {
        let s = vtk_string(&uniform(Dims::new(3, 2, 1)), None, "t");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[4], "DIMENSIONS 3 2 1");
        assert_eq!(lines[7], "POINT_DATA 6");
        assert_eq!(lines[10], "1.000000000e0");
        assert_eq!(lines[17], "1.000000000e-2 0.000000000e0 0.000000000e0");
        assert!(!s.contains("phi"));
        assert_eq!(lines.len(), 10 + 6 + 1 + 6);
    }

    #[test]
    fn phi_present_for_two_fluid() {
        let m = uniform(Dims::new(2, 2, 1));
        let s = vtk_string(&m, Some(&[1.0, -1.0, 0.5, 0.0]), "t");
        assert!(s.contains("SCALARS phi double 1"));
        assert!(s.trim_end().ends_with("0.000000000e0"));
    }

    #[test]
    fn csv_layout() {
        let mut ts = TimeSeries::new(&["step", "mass"]);
        ts.push(vec![0.0, 1.5]);
        ts.push(vec![10.0, 1.25]);
        assert_eq!(ts.to_csv(), "step,mass\n0.000000000e0,1.500000000e0\n1.000000000e1,1.250000000e0\n");
        assert_eq!(ts.column("mass").unwrap(), vec![1.5, 1.25]);
    }

    #[test]
    fn unwritable_path_is_reported() {
        let m = uniform(Dims::new(2, 2, 1));
        let err = write_vtk("/proc/definitely/not/here.vtk", &m, None, "t").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
