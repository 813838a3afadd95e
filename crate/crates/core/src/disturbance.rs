//! Yearly fire maps: sampled from a terrain-dependent regime or read from rasters.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allometry::TerrainType;
use crate::error::{Error, Result};
use crate::raster::{read_raster, write_raster, AsciiRaster, RasterHeader};
use crate::rng::{stream, Phase};

/// Annual per-cell ignition probability by terrain type. Fires do not spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireRegime {
    pub ridge: f64,
    pub slope: f64,
    pub valley: f64,
}

impl Default for FireRegime {
    fn default() -> Self {
        FireRegime {
            ridge: 0.02,
            slope: 0.01,
            valley: 0.005,
        }
    }
}

impl FireRegime {
    pub fn uniform(p: f64) -> Self {
        FireRegime {
            ridge: p,
            slope: p,
            valley: p,
        }
    }

    pub fn probability(&self, terrain: TerrainType) -> f64 {
        match terrain {
            TerrainType::Ridge => self.ridge,
            TerrainType::Slope => self.slope,
            TerrainType::Valley => self.valley,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in TerrainType::ALL {
            let p = self.probability(t);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(
                    format!("fire_regime.{}", t.name()),
                    format!("must lie in [0, 1], got {p}"),
                ));
            }
        }
        Ok(())
    }
}

/// Burning flags for one year, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FireMap {
    pub rows: usize,
    pub cols: usize,
    pub burning: Vec<bool>,
}

impl FireMap {
    pub fn none(rows: usize, cols: usize) -> Self {
        FireMap {
            rows,
            cols,
            burning: vec![false; rows * cols],
        }
    }

    pub fn is_burning(&self, cell: usize) -> bool {
        self.burning[cell]
    }

    pub fn burning_count(&self) -> usize {
        self.burning.iter().filter(|&&b| b).count()
    }
}

/// Samples one year of fires. Each non-null cell burns independently with
/// its terrain's probability, drawing from its own keyed stream.
pub fn sample_fires(
    regime: &FireRegime,
    terrain: &[Option<TerrainType>],
    rows: usize,
    cols: usize,
    year: u32,
    seed: u64,
) -> FireMap {
    debug_assert_eq!(terrain.len(), rows * cols);
    let burning = terrain
        .iter()
        .enumerate()
        .map(|(idx, t)| match t {
            Some(t) => {
                let p = regime.probability(*t);
                let u: f64 = stream(seed, idx as u64, u64::from(year), Phase::FireGen).random();
                u < p
            }
            None => false,
        })
        .collect();
    FireMap {
        rows,
        cols,
        burning,
    }
}

/// Reads a fire raster: values > 0.5 burn; null cells, and cells that are
/// null in `terrain`, never burn.
pub fn load_fire_map(path: &Path, terrain: &[Option<TerrainType>], rows: usize, cols: usize) -> Result<FireMap> {
    let r = read_raster(path)?;
    if r.header.rows != rows || r.header.cols != cols {
        return Err(Error::Geometry(format!(
            "fire map {} is {}x{}, landscape is {}x{}",
            path.display(),
            r.header.rows,
            r.header.cols,
            rows,
            cols
        )));
    }
    let burning = r
        .cells
        .iter()
        .zip(terrain)
        .map(|(v, t)| t.is_some() && v.is_some_and(|v| v > 0.5))
        .collect();
    Ok(FireMap {
        rows,
        cols,
        burning,
    })
}

/// Writes 1 for burning, 0 for not burning, `*` on null terrain.
pub fn write_fire_map(map: &FireMap, terrain: &[Option<TerrainType>], header: RasterHeader, path: &Path) -> Result<()> {
    let cells = map
        .burning
        .iter()
        .zip(terrain)
        .map(|(&b, t)| t.map(|_| if b { 1.0 } else { 0.0 }))
        .collect();
    write_raster(&AsciiRaster::new(header, cells)?, path)
}

pub fn fire_map_file_name(year: u32) -> String {
    format!("fire_{year}.asc")
}

/// Where a run's fires come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FireSource {
    None,
    Regime(FireRegime),
    /// Directory of `fire_<year>.asc`; years without a file have no fire.
    Maps(PathBuf),
}

impl FireSource {
    pub fn fire_map(
        &self,
        terrain: &[Option<TerrainType>],
        rows: usize,
        cols: usize,
        year: u32,
        seed: u64,
    ) -> Result<FireMap> {
        match self {
            FireSource::None => Ok(FireMap::none(rows, cols)),
            FireSource::Regime(r) => Ok(sample_fires(r, terrain, rows, cols, year, seed)),
            FireSource::Maps(dir) => {
                let path = dir.join(fire_map_file_name(year));
                if path.exists() {
                    load_fire_map(&path, terrain, rows, cols)
                } else {
                    Ok(FireMap::none(rows, cols))
                }
            }
        }
    }
}
