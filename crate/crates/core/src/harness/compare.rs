//! Cell-by-cell comparison of two completed runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::run::{EngineTiming, TIMING_FILE};
use crate::output::{OutputSeries, Variable, TOTAL_LABEL};

/// Floor of the relative-difference denominator.
pub const REL_EPS: f64 = 1e-9;

/// `|a - b| / max(|a|, |b|, eps)`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_EPS)
}

/// Mean relative difference over cells that are non-null in both maps.
pub fn mean_abs_relative_difference(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Geometry(format!("{} cells vs {} cells", a.len(), b.len())));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        match (x, y) {
            (Some(x), Some(y)) => {
                sum += relative_difference(*x, *y);
                n += 1;
            }
            (None, None) => {}
            _ => return Err(Error::Geometry(format!("cell {i} is null in only one run"))),
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableComparison {
    pub variable: Variable,
    pub label: String,
    /// Mean absolute relative difference per year.
    pub mard: Vec<f64>,
    /// Mean of `mard` over simulated years (year 0 excluded when others exist).
    pub mean_mard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub years: Vec<u32>,
    pub variables: Vec<VariableComparison>,
    pub final_density_total: [f64; 2],
    pub final_basal_area_total: [f64; 2],
    /// Landscape basal area of B over A, per year.
    pub basal_area_ratio: Vec<f64>,
    /// Largest `max(a/b, b/a)` of landscape basal area over simulated years.
    pub max_basal_area_ratio: f64,
    pub max_basal_area_ratio_year: u32,
    /// Stepping wall time of each run, when timings were recorded.
    pub runtime_seconds: [Option<f64>; 2],
    /// B over A.
    pub runtime_ratio: Option<f64>,
}

impl ComparisonReport {
    pub fn variable(&self, variable: Variable, label: &str) -> Option<&VariableComparison> {
        self.variables
            .iter()
            .find(|v| v.variable == variable && v.label == label)
    }

    /// Per-year mean relative differences, one column per variable and label.
    pub fn mard_csv(&self) -> String {
        let mut out = String::from("year");
        for v in &self.variables {
            let _ = write!(out, ",{}_{}", v.variable, v.label);
        }
        out.push_str(",basal_area_ratio\n");
        for (i, year) in self.years.iter().enumerate() {
            let _ = write!(out, "{year}");
            for v in &self.variables {
                let _ = write!(out, ",{}", v.mard[i]);
            }
            let _ = writeln!(out, ",{}", self.basal_area_ratio[i]);
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let dens = self.variable(Variable::Density, TOTAL_LABEL).map_or(f64::NAN, |v| v.mean_mard);
        let ba = self.variable(Variable::BasalArea, TOTAL_LABEL).map_or(f64::NAN, |v| v.mean_mard);
        let _ = writeln!(s, "years compared: {}", self.years.len());
        let _ = writeln!(s, "mean relative difference, total density: {dens:.6}");
        let _ = writeln!(s, "mean relative difference, total basal area: {ba:.6}");
        let _ = writeln!(
            s,
            "final total density: {} vs {}",
            self.final_density_total[0], self.final_density_total[1]
        );
        let _ = writeln!(
            s,
            "final total basal area: {} vs {}",
            self.final_basal_area_total[0], self.final_basal_area_total[1]
        );
        let _ = writeln!(
            s,
            "max basal area ratio: {:.4} (year {})",
            self.max_basal_area_ratio, self.max_basal_area_ratio_year
        );
        match self.runtime_ratio {
            Some(r) => {
                let _ = writeln!(s, "runtime ratio (B/A): {r:.4}");
            }
            None => s.push_str("runtime ratio: not recorded\n"),
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("mard.csv");
        fs::write(&path, self.mard_csv()).map_err(|e| Error::io(&path, e))
    }
}

fn landscape_totals(series: &OutputSeries, variable: Variable) -> Vec<f64> {
    series
        .get(variable, TOTAL_LABEL)
        .map(|years| years.iter().map(|m| m.iter().flatten().sum()).collect())
        .unwrap_or_default()
}

/// Compares two output series with identical geometry, years and maps.
pub fn compare_series(a: &OutputSeries, b: &OutputSeries) -> Result<ComparisonReport> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(Error::Geometry(format!(
            "runs are {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    if a.years != b.years {
        return Err(Error::Config(format!(
            "runs cover different years ({} vs {})",
            a.years.len(),
            b.years.len()
        )));
    }
    if a.maps.keys().ne(b.maps.keys()) {
        return Err(Error::Config("runs have different sets of output maps".into()));
    }
    let simulated: Vec<usize> = (0..a.years.len()).filter(|&i| a.years[i] > 0).collect();
    let averaged: Vec<usize> = if simulated.is_empty() {
        (0..a.years.len()).collect()
    } else {
        simulated
    };

    let mut variables = Vec::with_capacity(a.maps.len());
    for ((variable, label), ya) in &a.maps {
        let yb = &b.maps[&(*variable, label.clone())];
        let mard = ya
            .iter()
            .zip(yb)
            .map(|(ma, mb)| mean_abs_relative_difference(ma, mb))
            .collect::<Result<Vec<_>>>()?;
        let mean_mard = if averaged.is_empty() {
            0.0
        } else {
            averaged.iter().map(|&i| mard[i]).sum::<f64>() / averaged.len() as f64
        };
        variables.push(VariableComparison {
            variable: *variable,
            label: label.clone(),
            mard,
            mean_mard,
        });
    }

    let ba_a = landscape_totals(a, Variable::BasalArea);
    let ba_b = landscape_totals(b, Variable::BasalArea);
    let basal_area_ratio: Vec<f64> = ba_a
        .iter()
        .zip(&ba_b)
        .map(|(x, y)| if *x == 0.0 && *y == 0.0 { 1.0 } else { y / x })
        .collect();
    let mut max_ratio = 1.0f64;
    let mut max_year = a.years.first().copied().unwrap_or(0);
    for &i in &averaged {
        let (x, y) = (ba_a[i], ba_b[i]);
        let r = if x == 0.0 && y == 0.0 {
            1.0
        } else {
            (x / y).max(y / x)
        };
        if r > max_ratio {
            max_ratio = r;
            max_year = a.years[i];
        }
    }

    let last = |v: Vec<f64>| v.last().copied().unwrap_or(0.0);
    Ok(ComparisonReport {
        years: a.years.clone(),
        variables,
        final_density_total: [
            last(landscape_totals(a, Variable::Density)),
            last(landscape_totals(b, Variable::Density)),
        ],
        final_basal_area_total: [last(ba_a.clone()), last(ba_b.clone())],
        basal_area_ratio,
        max_basal_area_ratio: max_ratio,
        max_basal_area_ratio_year: max_year,
        runtime_seconds: [None, None],
        runtime_ratio: None,
    })
}

fn read_runtime(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join(TIMING_FILE)).ok()?;
    let t: serde_json::Value = serde_json::from_str(&text).ok()?;
    let years = t.get("year_seconds")?.as_array()?;
    Some(years.iter().filter_map(|v| v.as_f64()).sum())
}

/// Compares two engine output directories (for example `<run>/fine` and
/// `<run>/coarse`).
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<ComparisonReport> {
    let a = OutputSeries::load_dir(dir_a)?;
    let b = OutputSeries::load_dir(dir_b)?;
    let mut report = compare_series(&a, &b)?;
    let ta = read_runtime(dir_a);
    let tb = read_runtime(dir_b);
    report.runtime_seconds = [ta, tb];
    report.runtime_ratio = match (ta, tb) {
        (Some(x), Some(y)) if x > 0.0 => Some(y / x),
        _ => None,
    };
    Ok(report)
}

/// Stepping time from an in-memory timing record.
pub fn runtime_ratio(a: &EngineTiming, b: &EngineTiming) -> f64 {
    b.step_seconds() / a.step_seconds()
}
