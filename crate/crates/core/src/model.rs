//! Per-cell context and population bookkeeping shared by both engines.

use serde::Serialize;

use crate::allometry::TerrainType;

/// Everything a cell update needs to know about its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub terrain: TerrainType,
    /// Cell area (m²).
    pub cell_area: f64,
    /// Maximum plants per species per cell.
    pub max_plants: u32,
}

/// One year of population accounting for one species in one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SpeciesTally {
    pub n_start: u32,
    pub fire_dead: u32,
    pub natural_dead: u32,
    pub germinated: u32,
    pub n_end: u32,
}

impl SpeciesTally {
    /// `n_end == n_start - fire_dead - natural_dead + germinated`.
    pub fn is_balanced(&self) -> bool {
        i64::from(self.n_end)
            == i64::from(self.n_start) - i64::from(self.fire_dead) - i64::from(self.natural_dead)
                + i64::from(self.germinated)
    }
}

pub type CellTally = Vec<SpeciesTally>;
