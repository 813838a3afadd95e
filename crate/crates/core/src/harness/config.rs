//! Run configuration, presets and synthetic terrain.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allometry::TerrainType;
use crate::disturbance::FireSource;
use crate::engine::{EngineKind, Landscape};
use crate::error::{Error, Result};
use crate::params::{default_params, read_params, Parameters};
use crate::raster::read_raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineSelection {
    Fine,
    Coarse,
    Both,
}

impl EngineSelection {
    pub fn engines(self) -> Vec<EngineKind> {
        match self {
            EngineSelection::Fine => vec![EngineKind::Fine],
            EngineSelection::Coarse => vec![EngineKind::Coarse],
            EngineSelection::Both => vec![EngineKind::Fine, EngineKind::Coarse],
        }
    }
}

impl FromStr for EngineSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(EngineSelection::Fine),
            "coarse" => Ok(EngineSelection::Coarse),
            "both" => Ok(EngineSelection::Both),
            _ => Err(Error::Config(format!("unknown engine `{s}` (fine, coarse or both)"))),
        }
    }
}

impl fmt::Display for EngineSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineSelection::Fine => "fine",
            EngineSelection::Coarse => "coarse",
            EngineSelection::Both => "both",
        })
    }
}

/// Where the terrain map comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerrainSource {
    /// Three horizontal stripes: ridge (north), slope, valley (south).
    Banded,
    Uniform { terrain: TerrainType },
    /// Only the first cell is active; every other cell is null.
    SingleCell { terrain: TerrainType },
    /// Raster of terrain codes (1 ridge, 2 slope, 3 valley; `*` null).
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    /// m²
    pub cell_area: f64,
    /// Maximum plants per species per cell.
    pub max_plants: u32,
    /// Mean initial plants per cell, over all species.
    pub initial_avg: f64,
    pub terrain: TerrainSource,
    /// Sample fires each year from the parameter file's regime.
    pub fire_regime: bool,
    /// Directory of `fire_<year>.asc` maps.
    pub fire_maps: Option<PathBuf>,
    /// Lets fire maps override the regime when both are given.
    pub fire_maps_precedence: bool,
    pub years: u32,
    pub seed: u64,
    pub engine: EngineSelection,
    /// Parameter file; the shipped defaults when absent.
    pub params: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub threads: usize,
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset("5k").expect("built-in preset")
    }
}

pub const PRESETS: [&str; 3] = ["single-cell", "5k", "20k"];

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<RunConfig> {
        let base = RunConfig {
            rows: 50,
            cols: 100,
            cell_area: 100.0,
            max_plants: 100,
            initial_avg: 20.0,
            terrain: TerrainSource::Banded,
            fire_regime: true,
            fire_maps: None,
            fire_maps_precedence: false,
            years: 200,
            seed: 1,
            engine: EngineSelection::Both,
            params: None,
            threads: default_threads(),
            out: PathBuf::from("out"),
        };
        match name {
            "single-cell" => Ok(RunConfig {
                rows: 2,
                cols: 2,
                terrain: TerrainSource::SingleCell {
                    terrain: TerrainType::Slope,
                },
                fire_regime: false,
                ..base
            }),
            "5k" => Ok(base),
            "20k" => Ok(RunConfig {
                rows: 100,
                cols: 200,
                cell_area: 25.0,
                ..base
            }),
            _ => Err(Error::Config(format!(
                "unknown preset `{name}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Reads a TOML run configuration; missing keys take the `5k` values.
    pub fn from_toml_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        if cfg.threads == 0 {
            cfg.threads = default_threads();
        }
        Ok(cfg)
    }

    pub fn total_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rows", self.rows as f64),
            ("cols", self.cols as f64),
            ("cell_area", self.cell_area),
            ("max_plants", f64::from(self.max_plants)),
            ("threads", self.threads as f64),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
            }
        }
        if !(self.initial_avg.is_finite() && self.initial_avg >= 0.0) {
            return Err(Error::Config(format!(
                "`initial_avg` must be >= 0, got {}",
                self.initial_avg
            )));
        }
        if self.fire_regime && self.fire_maps.is_some() && !self.fire_maps_precedence {
            return Err(Error::Config(
                "both fire maps and a fire regime are configured; pass the fire-maps precedence flag to use the maps".into(),
            ));
        }
        Ok(())
    }

    pub fn load_params(&self) -> Result<Parameters> {
        match &self.params {
            Some(p) => read_params(p),
            None => Ok(default_params()),
        }
    }

    pub fn fire_source(&self, params: &Parameters) -> Result<FireSource> {
        self.validate()?;
        Ok(match (&self.fire_maps, self.fire_regime) {
            (Some(dir), _) => FireSource::Maps(dir.clone()),
            (None, true) => FireSource::Regime(params.fire_regime),
            (None, false) => FireSource::None,
        })
    }

    pub fn landscape(&self) -> Result<Landscape> {
        let n = self.total_cells();
        let terrain = match &self.terrain {
            TerrainSource::Banded => banded_terrain(self.rows, self.cols),
            TerrainSource::Uniform { terrain } => vec![Some(*terrain); n],
            TerrainSource::SingleCell { terrain } => {
                let mut t = vec![None; n];
                t[0] = Some(*terrain);
                t
            }
            TerrainSource::File { path } => return self.terrain_from_file(path),
        };
        Landscape::new(self.rows, self.cols, self.cell_area, terrain)
    }

    fn terrain_from_file(&self, path: &Path) -> Result<Landscape> {
        let r = read_raster(path)?;
        if r.header.rows != self.rows || r.header.cols != self.cols {
            return Err(Error::Geometry(format!(
                "terrain map {} is {}x{}, configuration says {}x{}",
                path.display(),
                r.header.rows,
                r.header.cols,
                self.rows,
                self.cols
            )));
        }
        let area = r.header.cell_area();
        if (area - self.cell_area).abs() > 1e-6 * self.cell_area {
            return Err(Error::Geometry(format!(
                "terrain map {} has cell area {area} m², configuration says {}",
                path.display(),
                self.cell_area
            )));
        }
        let terrain = r
            .cells
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                None => Ok(None),
                Some(code) => TerrainType::from_code(*code).map(Some).ok_or_else(|| Error::Raster {
                    path: path.to_path_buf(),
                    message: format!("cell {i}: `{code}` is not a terrain code (1, 2 or 3)"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Landscape::new(self.rows, self.cols, self.cell_area, terrain)
    }
}

/// Ridge, slope and valley stripes of (nearly) equal height.
pub fn banded_terrain(rows: usize, cols: usize) -> Vec<Option<TerrainType>> {
    (0..rows * cols)
        .map(|i| Some(TerrainType::ALL[(i / cols) * 3 / rows]))
        .collect()
}
