//! CSV and JSON files exchanged with the command line and the plotting
//! scripts. Floats are written with 17 significant digits so that values
//! round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::density::{AnyDensity, Density1D, RadialDensity2D};
use crate::error::{Error, Result};
use crate::record::Sample;
use crate::spectrum::SpectralState;

/// Relative tolerance on the spacing of grid columns read back from CSV.
pub const GRID_TOL: f64 = 1e-9;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path.as_ref(), e))?;
    text.push('\n');
    write_text(path, &text)
}

/// `x,value` (1D) or `r,value` (radial) at the cell centres.
pub fn density_csv(d: &AnyDensity) -> String {
    let (head, xs, vs): (&str, Vec<f64>, &[f64]) = match d {
        AnyDensity::Line(d) => ("x", d.centers().collect(), d.values()),
        AnyDensity::Radial(d) => ("r", d.centers().collect(), d.values()),
    };
    let mut out = format!("{head},value\n");
    for (x, v) in xs.iter().zip(vs) {
        let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*v));
    }
    out
}

pub fn write_density(path: impl AsRef<Path>, d: &AnyDensity) -> Result<()> {
    write_text(path, &density_csv(d))
}

/// `xi,re,im` for the stored modes.
pub fn spectrum_csv(s: &SpectralState) -> String {
    let mut out = String::from("xi,re,im\n");
    for (j, v) in s.values().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", fmt_f64(s.xi(j)), fmt_f64(v.re), fmt_f64(v.im));
    }
    out
}

/// `t,xi,re,im` for a sequence of spectral snapshots.
pub fn spectra_csv(spectra: &[(f64, SpectralState)]) -> String {
    let mut out = String::from("t,xi,re,im\n");
    for (t, s) in spectra {
        for (j, v) in s.values().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(s.xi(j)),
                fmt_f64(v.re),
                fmt_f64(v.im)
            );
        }
    }
    out
}

pub const DIAGNOSTICS_HEADER: &str =
    "t,second_moment,free_energy,free_energy_rescaled,w2_to_reference,d1_to_reference,xi_star,tail,mass_error";

/// One row per sample; fields that do not apply are left empty.
pub fn diagnostics_csv(samples: &[Sample]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.second_moment),
            fmt_opt(s.free_energy),
            fmt_opt(s.free_energy_rescaled),
            fmt_opt(s.w2_to_reference),
            fmt_opt(s.d1_to_reference),
            fmt_opt(s.xi_star),
            fmt_opt(s.tail),
            fmt_f64(s.mass_error),
        );
    }
    out
}

/// A parsed CSV file: header names and rows of optional floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Io {
            path: origin.to_string(),
            message: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row = line
                .split(',')
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse()
                            .map(Some)
                            .map_err(|_| bad(i + 1, format!("not a number: `{f}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != header.len() {
                return Err(bad(i + 1, format!("{} fields, header has {}", row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// `(first, name)` pairs where both are present.
    pub fn pairs(&self, first: &str, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let (a, b) = (self.column_index(first)?, self.column_index(name)?);
        Some(self.rows.iter().filter_map(|r| Some((r[a]?, r[b]?))).unzip())
    }
}

/// Reads a density CSV written by [`density_csv`]. The grid column must be
/// uniform and laid out as cell centres of `[-L, L]` or `[0, R]`.
pub fn read_density(path: impl AsRef<Path>) -> Result<AnyDensity> {
    let path = path.as_ref();
    let table = Table::read(path)?;
    parse_density(&table, &path.display().to_string())
}

pub fn parse_density(table: &Table, origin: &str) -> Result<AnyDensity> {
    let mismatch = |msg: String| Error::GridMismatch(format!("{origin}: {msg}"));
    let radial = match table.header.first().map(String::as_str) {
        Some("x") => false,
        Some("r") => true,
        other => return Err(mismatch(format!("first column must be x or r, got {other:?}"))),
    };
    let (xs, vs) = table
        .pairs(&table.header[0], "value")
        .ok_or_else(|| mismatch("missing value column".into()))?;
    if xs.len() != table.rows.len() {
        return Err(mismatch("empty fields".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(mismatch("fewer than two cells".into()));
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let span = xs[0].abs().max(xs[n - 1].abs());
    if !(h > 0.0)
        || xs
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > GRID_TOL * span.max(h))
    {
        return Err(mismatch("grid is not uniform".into()));
    }
    if radial {
        if (xs[0] - 0.5 * h).abs() > GRID_TOL * span.max(h) {
            return Err(mismatch("radial grid must start at dr/2".into()));
        }
        Ok(RadialDensity2D::from_values(n as f64 * h, vs)?.into())
    } else {
        let half_width = 0.5 * n as f64 * h;
        if (xs[0] + half_width - 0.5 * h).abs() > GRID_TOL * span.max(h) {
            return Err(mismatch("grid is not symmetric about the origin".into()));
        }
        Ok(Density1D::from_values(half_width, vs)?.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities_round_trip_exactly() {
        let d: AnyDensity = Density1D::from_fn(3.0, 50, |x| (-x * x).exp() / 3.0f64.sqrt())
            .unwrap()
            .into();
        let t = Table::parse(&density_csv(&d), "mem").unwrap();
        let back = parse_density(&t, "mem").unwrap();
        let (AnyDensity::Line(a), AnyDensity::Line(b)) = (&d, &back) else {
            panic!()
        };
        assert_eq!(a.values(), b.values());
        assert!((a.half_width() - b.half_width()).abs() < 1e-14);

        let r: AnyDensity = RadialDensity2D::from_fn(2.0, 40, |r| 1.0 / (1.0 + r)).unwrap().into();
        let back = parse_density(&Table::parse(&density_csv(&r), "mem").unwrap(), "mem").unwrap();
        assert_eq!(back.dimension(), 2);
    }

    #[test]
    fn nonuniform_grids_are_rejected() {
        let text = "x,value\n-1.5,0.1\n-0.5,0.2\n0.6,0.2\n1.5,0.1\n";
        match parse_density(&Table::parse(text, "mem").unwrap(), "mem") {
            Err(Error::GridMismatch(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_fields_read_as_missing() {
        let t = Table::parse("t,a,b\n0,1,\n1,2,3\n", "mem").unwrap();
        assert_eq!(t.pairs("t", "b"), Some((vec![1.0], vec![3.0])));
        assert!(Table::parse("t,a\n0,1,2\n", "mem").is_err());
    }
}
