//! Output variables, per-year map sets and output sinks.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{write_raster, AsciiRaster, RasterHeader};

pub const TOTAL_LABEL: &str = "total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    BasalArea,
    Density,
    Biomass,
    Lai,
    SeedBank,
    DeadBiomass,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::BasalArea,
        Variable::Density,
        Variable::Biomass,
        Variable::Lai,
        Variable::SeedBank,
        Variable::DeadBiomass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::BasalArea => "basal_area",
            Variable::Density => "density",
            Variable::Biomass => "biomass",
            Variable::Lai => "lai",
            Variable::SeedBank => "seed_bank",
            Variable::DeadBiomass => "dead_biomass",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown output variable `{s}`")))
    }
}

/// Per-species state summary of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StandSummary {
    /// Plant count.
    pub density: f64,
    /// m².
    pub basal_area: f64,
    /// kg.
    pub biomass: f64,
    /// m² of leaves; divided by cell area to give LAI.
    pub leaf_area: f64,
    pub seed_bank: f64,
    /// kg.
    pub dead_biomass: f64,
}

impl StandSummary {
    pub fn value(&self, variable: Variable, cell_area: f64) -> f64 {
        match variable {
            Variable::BasalArea => self.basal_area,
            Variable::Density => self.density,
            Variable::Biomass => self.biomass,
            Variable::Lai => self.leaf_area / cell_area,
            Variable::SeedBank => self.seed_bank,
            Variable::DeadBiomass => self.dead_biomass,
        }
    }

    pub fn add(&mut self, other: &StandSummary) {
        self.density += other.density;
        self.basal_area += other.basal_area;
        self.biomass += other.biomass;
        self.leaf_area += other.leaf_area;
        self.seed_bank += other.seed_bank;
        self.dead_biomass += other.dead_biomass;
    }

    pub fn total(stands: &[StandSummary]) -> StandSummary {
        let mut t = StandSummary::default();
        for s in stands {
            t.add(s);
        }
        t
    }
}

/// One output raster: a variable for one species (or the stand total).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub variable: Variable,
    pub label: String,
    /// Row-major, `None` on null cells.
    pub values: Vec<Option<f64>>,
}

impl OutputMap {
    pub fn file_name(&self, year: u32) -> String {
        map_file_name(self.variable, &self.label, year)
    }
}

pub fn map_file_name(variable: Variable, label: &str, year: u32) -> String {
    format!("{}_{}_{}.asc", variable.name(), label, year)
}

/// All output maps of one engine at the end of one year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearMaps {
    pub year: u32,
    /// Ordered by variable, then species in parameter order, then the stand total.
    pub maps: Vec<OutputMap>,
}

impl YearMaps {
    /// Assembles maps from per-cell summaries. `cells` pairs a row-major cell
    /// index with that cell's per-species summaries.
    pub fn assemble(
        year: u32,
        labels: &[String],
        n_cells: usize,
        cell_area: f64,
        cells: &[(usize, Vec<StandSummary>)],
    ) -> YearMaps {
        let totals: Vec<StandSummary> = cells.iter().map(|(_, s)| StandSummary::total(s)).collect();
        let mut maps = Vec::with_capacity(Variable::ALL.len() * (labels.len() + 1));
        for variable in Variable::ALL {
            for (k, label) in labels.iter().enumerate() {
                let mut values = vec![None; n_cells];
                for (idx, stands) in cells {
                    values[*idx] = Some(stands[k].value(variable, cell_area));
                }
                maps.push(OutputMap {
                    variable,
                    label: label.clone(),
                    values,
                });
            }
            let mut values = vec![None; n_cells];
            for ((idx, _), total) in cells.iter().zip(&totals) {
                values[*idx] = Some(total.value(variable, cell_area));
            }
            maps.push(OutputMap {
                variable,
                label: TOTAL_LABEL.to_string(),
                values,
            });
        }
        YearMaps { year, maps }
    }

    pub fn get(&self, variable: Variable, label: &str) -> Option<&OutputMap> {
        self.maps
            .iter()
            .find(|m| m.variable == variable && m.label == label)
    }

    /// Landscape sum of a map over non-null cells.
    pub fn landscape_total(&self, variable: Variable, label: &str) -> f64 {
        self.get(variable, label)
            .map(|m| m.values.iter().flatten().sum())
            .unwrap_or(0.0)
    }
}

/// Receives each year's maps at the year barrier.
pub trait OutputSink {
    fn accept(&mut self, maps: &YearMaps) -> Result<()>;
}

/// Drops everything; used for timing runs.
#[derive(Debug, Default)]
pub struct Discard;

impl OutputSink for Discard {
    fn accept(&mut self, _maps: &YearMaps) -> Result<()> {
        Ok(())
    }
}

/// Keeps every year's maps in memory.
#[derive(Debug, Default, Clone)]
pub struct SeriesRecorder {
    pub years: Vec<YearMaps>,
}

impl OutputSink for SeriesRecorder {
    fn accept(&mut self, maps: &YearMaps) -> Result<()> {
        self.years.push(maps.clone());
        Ok(())
    }
}

/// Landscape totals of every stand-total variable, one row per year.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub year: u32,
    /// Indexed like `Variable::ALL`.
    pub totals: [f64; 6],
}

impl Trajectory {
    pub fn record(&mut self, maps: &YearMaps) {
        let mut totals = [0.0; 6];
        for (slot, variable) in totals.iter_mut().zip(Variable::ALL) {
            *slot = maps.landscape_total(variable, TOTAL_LABEL);
        }
        self.rows.push(TrajectoryRow {
            year: maps.year,
            totals,
        });
    }

    pub fn csv_header(suffix: &str) -> String {
        Variable::ALL
            .iter()
            .map(|v| format!("{}_total{}", v.name(), suffix))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("year,{}\n", Self::csv_header(""));
        for row in &self.rows {
            out.push_str(&row.year.to_string());
            for v in row.totals {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl OutputSink for Trajectory {
    fn accept(&mut self, maps: &YearMaps) -> Result<()> {
        self.record(maps);
        Ok(())
    }
}

/// Writes `<dir>/<variable>_<label>_<year>.asc` for every map of every year.
#[derive(Debug)]
pub struct MapWriter {
    dir: PathBuf,
    header: RasterHeader,
    files_written: usize,
}

impl MapWriter {
    pub fn create(dir: impl Into<PathBuf>, header: RasterHeader) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(MapWriter {
            dir,
            header,
            files_written: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files_written(&self) -> usize {
        self.files_written
    }
}

impl OutputSink for MapWriter {
    fn accept(&mut self, maps: &YearMaps) -> Result<()> {
        self.files_written += write_outputs(&self.dir, &self.header, maps)?;
        Ok(())
    }
}

/// Writes one year's maps into `dir`; returns the number of files written.
pub fn write_outputs(dir: &Path, header: &RasterHeader, maps: &YearMaps) -> Result<usize> {
    for map in &maps.maps {
        let raster = AsciiRaster::new(*header, map.values.clone())?;
        write_raster(&raster, &dir.join(map.file_name(maps.year)))?;
    }
    Ok(maps.maps.len())
}

/// Fans one year out to several sinks.
pub struct Tee<'a> {
    pub sinks: Vec<&'a mut dyn OutputSink>,
}

impl OutputSink for Tee<'_> {
    fn accept(&mut self, maps: &YearMaps) -> Result<()> {
        for s in self.sinks.iter_mut() {
            s.accept(maps)?;
        }
        Ok(())
    }
}

/// Output maps of one engine run, keyed by (variable, label), one entry per year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSeries {
    pub rows: usize,
    pub cols: usize,
    pub years: Vec<u32>,
    pub maps: BTreeMap<(Variable, String), Vec<Vec<Option<f64>>>>,
}

impl OutputSeries {
    pub fn from_years(rows: usize, cols: usize, years: &[YearMaps]) -> OutputSeries {
        let mut series = OutputSeries {
            rows,
            cols,
            ..Default::default()
        };
        for ym in years {
            series.years.push(ym.year);
            for m in &ym.maps {
                series
                    .maps
                    .entry((m.variable, m.label.clone()))
                    .or_default()
                    .push(m.values.clone());
            }
        }
        series
    }

    /// Loads every `<variable>_<label>_<year>.asc` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<OutputSeries> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut found: BTreeMap<(Variable, String), BTreeMap<u32, PathBuf>> = BTreeMap::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some((variable, label, year)) = parse_map_file_name(&name) {
                found
                    .entry((variable, label))
                    .or_default()
                    .insert(year, entry.path());
            }
        }
        if found.is_empty() {
            return Err(Error::RunDir {
                path: dir.to_path_buf(),
                message: "no output maps found".into(),
            });
        }
        let years: Vec<u32> = found.values().next().unwrap().keys().copied().collect();
        let mut series = OutputSeries {
            years: years.clone(),
            ..Default::default()
        };
        let mut geometry: Option<(usize, usize)> = None;
        for (key, by_year) in found {
            let these: Vec<u32> = by_year.keys().copied().collect();
            if these != years {
                return Err(Error::RunDir {
                    path: dir.to_path_buf(),
                    message: format!("{}_{} has a different set of years", key.0, key.1),
                });
            }
            let mut values = Vec::with_capacity(by_year.len());
            for path in by_year.values() {
                let r = crate::raster::read_raster(path)?;
                let g = (r.header.rows, r.header.cols);
                match geometry {
                    None => geometry = Some(g),
                    Some(prev) if prev != g => {
                        return Err(Error::Geometry(format!(
                            "{} is {}x{}, expected {}x{}",
                            path.display(),
                            g.0,
                            g.1,
                            prev.0,
                            prev.1
                        )))
                    }
                    _ => {}
                }
                values.push(r.cells);
            }
            series.maps.insert(key, values);
        }
        let (rows, cols) = geometry.unwrap_or((0, 0));
        series.rows = rows;
        series.cols = cols;
        Ok(series)
    }

    pub fn get(&self, variable: Variable, label: &str) -> Option<&Vec<Vec<Option<f64>>>> {
        self.maps.get(&(variable, label.to_string()))
    }
}

/// Splits `<variable>_<label>_<year>.asc`. Variable names contain underscores,
/// so the variable is matched by prefix.
pub fn parse_map_file_name(name: &str) -> Option<(Variable, String, u32)> {
    let stem = name.strip_suffix(".asc")?;
    let (rest, year) = stem.rsplit_once('_')?;
    let year: u32 = year.parse().ok()?;
    // longest variable name first so `dead_biomass` wins over `biomass`
    let mut vars = Variable::ALL;
    vars.sort_by_key(|v| std::cmp::Reverse(v.name().len()));
    for v in vars {
        if let Some(label) = rest.strip_prefix(v.name()).and_then(|r| r.strip_prefix('_')) {
            if !label.is_empty() {
                return Some((v, label.to_string(), year));
            }
        }
    }
    None
}
