//! Scalar fields on a [`SphereGrid`] and their on-disk formats.
//!
//! Text: header `polar_rad,azimuth_rad,value`, one row per grid point in
//! row-major order.
//!
//! Binary: little-endian `f64` throughout. An 8-value header
//! `[magic, version, n_polar, n_azimuth, axes, 0, 0, 0]` is followed by the
//! values in row-major order. `axes` is 0 for a [`SphereGrid::regular`] grid;
//! for any other grid it is 1 and the polar and azimuth axes are stored
//! between the header and the values.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::sphere::SphereGrid;

pub const TEXT_HEADER: &str = "polar_rad,azimuth_rad,value";

/// `"SFLD"` read as a big-endian integer.
pub const BINARY_MAGIC: f64 = 1_397_116_996.0;
pub const BINARY_VERSION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalField {
    grid: SphereGrid,
    values: Vec<f64>,
}

impl SphericalField {
    pub fn new(grid: SphereGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at index {i}")));
        }
        Ok(SphericalField { grid, values })
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.n_azimuth();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TEXT_HEADER}")?;
        for (p, v) in self.grid.points().iter().zip(&self.values) {
            // rows store the axis values exactly so a reread rebuilds the grid
            writeln!(w, "{:.17e},{:.17e},{:.17e}", p.polar(), p.azimuth(), v)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == TEXT_HEADER => {}
            Some((_, Ok(h))) => {
                return Err(parse_err(1, format!("expected header {TEXT_HEADER:?}, found {h:?}")))
            }
            Some((_, Err(e))) => return Err(e.into()),
            None => return Err(parse_err(1, "empty field file".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(parse_err(i + 1, format!("expected 3 columns, found {}", cols.len())));
            }
            let mut vals = [0.0; 3];
            for (v, c) in vals.iter_mut().zip(&cols) {
                *v = c
                    .parse()
                    .map_err(|e| parse_err(i + 1, format!("bad number {c:?}: {e}")))?;
            }
            rows.push(vals);
        }
        let polar = distinct_in_order(rows.iter().map(|r| r[0]));
        let azimuth = distinct_sorted(rows.iter().map(|r| r[1]));
        let grid = SphereGrid::from_axes(polar, azimuth)?;
        if rows.len() != grid.len() {
            return Err(parse_err(
                rows.len() + 1,
                format!("{} rows do not form a complete {} x {} grid", rows.len(), grid.n_polar(), grid.n_azimuth()),
            ));
        }
        for (k, (r, p)) in rows.iter().zip(grid.points()).enumerate() {
            if r[0] != p.polar() || r[1] != p.azimuth() {
                return Err(parse_err(k + 2, "rows are not in row-major grid order".into()));
            }
        }
        SphericalField::new(grid, rows.into_iter().map(|r| r[2]).collect())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (np, na) = (self.grid.n_polar(), self.grid.n_azimuth());
        let regular = SphereGrid::regular(np, na).is_ok_and(|g| g == self.grid);
        let header = [
            BINARY_MAGIC,
            BINARY_VERSION,
            np as f64,
            na as f64,
            if regular { 0.0 } else { 1.0 },
            0.0,
            0.0,
            0.0,
        ];
        let axes: &[f64] = if regular { &[] } else { self.grid.polar_axis() };
        let az: &[f64] = if regular { &[] } else { self.grid.azimuth_axis() };
        let all = header.iter().chain(axes).chain(az).chain(&self.values);
        for v in all {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, source_name: &str) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |message: &str| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: message.to_string(),
        };
        if bytes.len() % 8 != 0 || bytes.len() < 64 {
            return Err(bad("truncated binary field"));
        }
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if v[0] != BINARY_MAGIC || v[1] != BINARY_VERSION {
            return Err(bad("not a binary field file (magic/version mismatch)"));
        }
        let (np, na) = (v[2] as usize, v[3] as usize);
        let axes = if v[4] == 1.0 { np + na } else { 0 };
        if v.len() != 8 + axes + np * na {
            return Err(bad("binary field length does not match its header"));
        }
        let grid = if axes == 0 {
            SphereGrid::regular(np, na)?
        } else {
            SphereGrid::from_axes(v[8..8 + np].to_vec(), v[8 + np..8 + axes].to_vec())?
        };
        SphericalField::new(grid, v[8 + axes..].to_vec())
    }
}

fn distinct_in_order(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in it {
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn distinct_sorted(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
