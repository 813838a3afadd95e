//! GRASS-compatible ASCII raster grids.
//!
//! ```text
//! north: 20
//! south: 0
//! east: 20
//! west: 0
//! rows: 2
//! cols: 2
//! 1 2
//! 3 *
//! ```
//!
//! `*` marks a null cell. Values are written with six significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance when checking that cells are square.
const SQUARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterHeader {
    pub north: f64,
    pub south: f64,
    pub east: f64,
    pub west: f64,
    pub rows: usize,
    pub cols: usize,
}

impl RasterHeader {
    /// Header for a grid of square cells anchored at the origin.
    pub fn from_cell_area(rows: usize, cols: usize, cell_area: f64) -> RasterHeader {
        let side = cell_area.sqrt();
        RasterHeader {
            north: side * rows as f64,
            south: 0.0,
            east: side * cols as f64,
            west: 0.0,
            rows,
            cols,
        }
    }

    pub fn cell_side(&self) -> f64 {
        (self.east - self.west) / self.cols as f64
    }

    pub fn cell_area(&self) -> f64 {
        let s = self.cell_side();
        s * s
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.rows == 0 || self.cols == 0 {
            return Err("rows and cols must be positive".into());
        }
        if !(self.north > self.south) || !(self.east > self.west) {
            return Err("extent must satisfy north > south and east > west".into());
        }
        let ew = (self.east - self.west) / self.cols as f64;
        let ns = (self.north - self.south) / self.rows as f64;
        if (ew - ns).abs() > SQUARE_TOL * ew.max(ns) {
            return Err(format!("cells are not square: {ew} (east-west) vs {ns} (north-south)"));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &RasterHeader) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiRaster {
    pub header: RasterHeader,
    /// Row-major from the north edge; `None` is null.
    pub cells: Vec<Option<f64>>,
}

impl AsciiRaster {
    pub fn new(header: RasterHeader, cells: Vec<Option<f64>>) -> Result<Self> {
        header.validate().map_err(|m| Error::Raster {
            path: "<memory>".into(),
            message: m,
        })?;
        if cells.len() != header.len() {
            return Err(Error::Raster {
                path: "<memory>".into(),
                message: format!("{} cells for a {}x{} grid", cells.len(), header.rows, header.cols),
            });
        }
        Ok(AsciiRaster { header, cells })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.header.cols + col]
    }
}

const HEADER_KEYS: [&str; 6] = ["north", "south", "east", "west", "rows", "cols"];

/// Parses raster text; `origin` only labels error messages.
pub fn parse_raster(text: &str, origin: &Path) -> Result<AsciiRaster> {
    let err = |message: String| Error::Raster {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut values: [Option<f64>; 6] = [None; 6];
    for _ in 0..HEADER_KEYS.len() {
        let line = lines
            .next()
            .ok_or_else(|| err("truncated header".into()))?;
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| err(format!("malformed header line `{line}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let slot = HEADER_KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| err(format!("unknown header key `{key}`")))?;
        if values[slot].is_some() {
            return Err(err(format!("duplicate header key `{key}`")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("non-numeric header value for `{key}`: `{}`", value.trim())))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite header value for `{key}`")));
        }
        values[slot] = Some(v);
    }
    let [north, south, east, west, rows, cols] = values.map(|v| v.unwrap());
    let as_count = |v: f64, key: &str| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(err(format!("`{key}` must be a positive integer, got {v}")))
        }
    };
    let header = RasterHeader {
        north,
        south,
        east,
        west,
        rows: as_count(rows, "rows")?,
        cols: as_count(cols, "cols")?,
    };
    header.validate().map_err(err)?;

    let mut cells = Vec::with_capacity(header.len());
    for (r, line) in lines.enumerate() {
        if r >= header.rows {
            return Err(err(format!(
                "more than {} data rows",
                header.rows
            )));
        }
        let before = cells.len();
        for token in line.split_whitespace() {
            if token == "*" {
                cells.push(None);
                continue;
            }
            let v: f64 = token
                .parse()
                .map_err(|_| err(format!("non-numeric cell `{token}` in data row {}", r + 1)))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite cell `{token}` in data row {}", r + 1)));
            }
            cells.push(Some(v));
        }
        let got = cells.len() - before;
        if got != header.cols {
            return Err(err(format!(
                "data row {} has {got} cells, expected {}",
                r + 1,
                header.cols
            )));
        }
    }
    if cells.len() != header.len() {
        return Err(err(format!(
            "{} data rows, expected {}",
            cells.len() / header.cols,
            header.rows
        )));
    }
    Ok(AsciiRaster { header, cells })
}

pub fn read_raster(path: &Path) -> Result<AsciiRaster> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster(&text, path)
}

/// Formats a value with six significant digits, `%g` style: trailing zeros
/// are dropped and scientific notation is used outside [1e-4, 1e6).
pub fn format_value(v: f64) -> String {
    const SIG: i32 = 6;
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG).contains(&exp) {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn raster_to_string(r: &AsciiRaster) -> String {
    let h = &r.header;
    let mut out = String::with_capacity(64 + r.cells.len() * 8);
    // header values use the shortest round-trip representation
    let _ = writeln!(out, "north: {}", h.north);
    let _ = writeln!(out, "south: {}", h.south);
    let _ = writeln!(out, "east: {}", h.east);
    let _ = writeln!(out, "west: {}", h.west);
    let _ = writeln!(out, "rows: {}", h.rows);
    let _ = writeln!(out, "cols: {}", h.cols);
    for row in r.cells.chunks(h.cols) {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match c {
                Some(v) => out.push_str(&format_value(*v)),
                None => out.push('*'),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_raster(r: &AsciiRaster, path: &Path) -> Result<()> {
    fs::write(path, raster_to_string(r)).map_err(|e| Error::io(path, e))
}
