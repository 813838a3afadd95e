//! Persisted-state size of each engine.

use serde::Serialize;

use crate::coarse::CoarseCell;
use crate::engine::{CoarseEngine, FineEngine, Simulation};

/// Scalars each engine must carry from one year to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateCardinality {
    pub active_cells: usize,
    pub species: usize,
    pub max_plants: u32,
    pub plants: usize,
    /// Three per plant: diameter, age, seeds.
    pub fine: usize,
    /// Four per (cell, species): count, mean diameter, mean age, seed bank.
    pub coarse: usize,
    /// `active_cells * species * max_plants * 3`.
    pub fine_bound: usize,
}

pub fn state_cardinality(fine: &Simulation<FineEngine>, coarse: &Simulation<CoarseEngine>) -> StateCardinality {
    let species = fine.params.species.len();
    let active_cells = fine.cells.len();
    StateCardinality {
        active_cells,
        species,
        max_plants: fine.max_plants,
        plants: fine.plant_count(),
        fine: fine.persisted_scalars(),
        coarse: coarse.persisted_scalars(),
        fine_bound: active_cells * species * fine.max_plants as usize * 3,
    }
}

/// Coarse count for a landscape without building it: `active * species * 4`.
pub fn coarse_cardinality(active_cells: usize, species: usize) -> usize {
    active_cells * CoarseCell::empty(crate::allometry::TerrainType::Slope, species).persisted_scalars()
}
