//! Whole-landscape year loop shared by both engines.
//!
//! Cells are independent within a year. Each year every active cell is
//! stepped (in parallel on a rayon pool), then outputs are assembled at the
//! barrier. Randomness is keyed by cell and year, so results do not depend on
//! the worker count or processing order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::abstraction::abstraction_map;
use crate::allometry::{LandscapeGeometry, TerrainType};
use crate::coarse::{step_cell_coarse, summarize_coarse, CoarseCell};
use crate::disturbance::FireMap;
use crate::error::{Error, Result};
use crate::fine::{initialize_fine, step_cell_fine, summarize_fine, FineCell};
use crate::model::{CellTally, Site};
use crate::output::{StandSummary, YearMaps};
use crate::params::Parameters;
use crate::raster::RasterHeader;
use crate::rng::{stream, Phase, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Fine,
    Coarse,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Fine => "fine",
            EngineKind::Coarse => "coarse",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(EngineKind::Fine),
            "coarse" => Ok(EngineKind::Coarse),
            _ => Err(Error::Config(format!("unknown engine `{s}`"))),
        }
    }
}

/// Per-cell behaviour of an engine.
pub trait CellEngine: Clone + fmt::Debug + PartialEq {
    type Cell: Clone + Send + Sync + PartialEq + fmt::Debug;
    const KIND: EngineKind;

    fn step(cell: &mut Self::Cell, params: &Parameters, site: &Site, key: StreamKey, burning: bool) -> CellTally;
    fn summarize(cell: &Self::Cell, params: &Parameters) -> Vec<StandSummary>;
    fn persisted_scalars(cell: &Self::Cell) -> usize;
    fn plant_count(cell: &Self::Cell) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineEngine;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseEngine;

impl CellEngine for FineEngine {
    type Cell = FineCell;
    const KIND: EngineKind = EngineKind::Fine;

    fn step(cell: &mut FineCell, params: &Parameters, site: &Site, key: StreamKey, burning: bool) -> CellTally {
        step_cell_fine(cell, params, site, key, burning)
    }
    fn summarize(cell: &FineCell, params: &Parameters) -> Vec<StandSummary> {
        summarize_fine(cell, params)
    }
    fn persisted_scalars(cell: &FineCell) -> usize {
        cell.persisted_scalars()
    }
    fn plant_count(cell: &FineCell) -> usize {
        cell.plant_count()
    }
}

impl CellEngine for CoarseEngine {
    type Cell = CoarseCell;
    const KIND: EngineKind = EngineKind::Coarse;

    fn step(cell: &mut CoarseCell, params: &Parameters, site: &Site, key: StreamKey, burning: bool) -> CellTally {
        step_cell_coarse(cell, params, site, key, burning)
    }
    fn summarize(cell: &CoarseCell, params: &Parameters) -> Vec<StandSummary> {
        summarize_coarse(cell, params)
    }
    fn persisted_scalars(cell: &CoarseCell) -> usize {
        cell.persisted_scalars()
    }
    fn plant_count(cell: &CoarseCell) -> usize {
        cell.plant_count()
    }
}

/// Geometry plus a terrain type for every non-null cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub geometry: LandscapeGeometry,
    /// Row-major; `None` on null cells.
    pub terrain: Vec<Option<TerrainType>>,
}

impl Landscape {
    pub fn new(rows: usize, cols: usize, cell_area: f64, terrain: Vec<Option<TerrainType>>) -> Result<Self> {
        let null_mask = terrain.iter().map(Option::is_none).collect();
        let geometry = LandscapeGeometry::new(rows, cols, cell_area, null_mask)?;
        Ok(Landscape { geometry, terrain })
    }

    pub fn rows(&self) -> usize {
        self.geometry.rows
    }

    pub fn cols(&self) -> usize {
        self.geometry.cols
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometry.is_empty()
    }

    pub fn active_cells(&self) -> impl Iterator<Item = (usize, TerrainType)> + '_ {
        self.terrain
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (i, t)))
    }

    pub fn raster_header(&self) -> RasterHeader {
        RasterHeader::from_cell_area(self.rows(), self.cols(), self.geometry.cell_area)
    }
}

/// One engine's landscape state.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<E: CellEngine> {
    pub params: Parameters,
    pub landscape: Landscape,
    pub max_plants: u32,
    pub seed: u64,
    /// Number of completed years.
    pub year: u32,
    /// Active cells in row-major order.
    pub cells: Vec<(usize, E::Cell)>,
}

/// Outcome of one simulated year.
#[derive(Debug, Clone)]
pub struct YearReport {
    /// Per active cell, in row-major order.
    pub tallies: Vec<(usize, CellTally)>,
    pub maps: YearMaps,
}

impl Simulation<FineEngine> {
    /// Random initial plants in every active cell.
    pub fn initialize(
        params: Parameters,
        landscape: Landscape,
        max_plants: u32,
        initial_avg: f64,
        seed: u64,
    ) -> Self {
        let cells = landscape
            .active_cells()
            .map(|(idx, terrain)| {
                let site = Site {
                    terrain,
                    cell_area: landscape.geometry.cell_area,
                    max_plants,
                };
                let mut rng = stream(seed, idx as u64, 0, Phase::Init);
                (idx, initialize_fine(&params, &site, initial_avg, &mut rng))
            })
            .collect();
        Simulation {
            params,
            landscape,
            max_plants,
            seed,
            year: 0,
            cells,
        }
    }
}

impl Simulation<CoarseEngine> {
    /// Cohort state obtained by abstracting a fine state cell by cell.
    pub fn from_fine(fine: &Simulation<FineEngine>) -> Self {
        Simulation {
            params: fine.params.clone(),
            landscape: fine.landscape.clone(),
            max_plants: fine.max_plants,
            seed: fine.seed,
            year: fine.year,
            cells: fine
                .cells
                .iter()
                .map(|(idx, c)| (*idx, abstraction_map(c)))
                .collect(),
        }
    }
}

impl<E: CellEngine> Simulation<E> {
    pub fn kind(&self) -> EngineKind {
        E::KIND
    }

    fn site(&self, terrain: TerrainType) -> Site {
        Site {
            terrain,
            cell_area: self.landscape.geometry.cell_area,
            max_plants: self.max_plants,
        }
    }

    fn check_fire_map(&self, fire: &FireMap) -> Result<()> {
        if fire.rows != self.landscape.rows() || fire.cols != self.landscape.cols() {
            return Err(Error::Config(format!(
                "fire map is {}x{}, landscape is {}x{}",
                fire.rows,
                fire.cols,
                self.landscape.rows(),
                self.landscape.cols()
            )));
        }
        Ok(())
    }

    fn step_one(&self, idx: usize, cell: &mut E::Cell, fire: &FireMap, year: u32) -> (CellTally, Vec<StandSummary>) {
        let terrain = self.landscape.terrain[idx].expect("active cell has terrain");
        let key = StreamKey::new(self.seed, idx, year);
        let tally = E::step(cell, &self.params, &self.site(terrain), key, fire.is_burning(idx));
        let summary = E::summarize(cell, &self.params);
        (tally, summary)
    }

    /// Output maps of the current state.
    pub fn maps(&self) -> YearMaps {
        let summaries: Vec<(usize, Vec<StandSummary>)> = self
            .cells
            .iter()
            .map(|(idx, c)| (*idx, E::summarize(c, &self.params)))
            .collect();
        self.assemble(self.year, &summaries)
    }

    fn assemble(&self, year: u32, summaries: &[(usize, Vec<StandSummary>)]) -> YearMaps {
        YearMaps::assemble(
            year,
            &self.params.labels(),
            self.landscape.len(),
            self.landscape.geometry.cell_area,
            summaries,
        )
    }

    /// Advances every active cell by one year on `pool`.
    pub fn step(&mut self, fire: &FireMap, pool: &ThreadPool) -> Result<YearReport> {
        self.check_fire_map(fire)?;
        let year = self.year + 1;
        let mut cells = std::mem::take(&mut self.cells);
        let this = &*self;
        let results: Vec<(CellTally, Vec<StandSummary>)> = pool.install(|| {
            cells
                .par_iter_mut()
                .map(|(idx, cell)| this.step_one(*idx, cell, fire, year))
                .collect()
        });
        self.cells = cells;
        Ok(self.finish_year(year, results))
    }

    /// Advances every active cell by one year on the calling thread, visiting
    /// cells in `order` (positions into the active-cell list).
    pub fn step_in_order(&mut self, fire: &FireMap, order: &[usize]) -> Result<YearReport> {
        self.check_fire_map(fire)?;
        let year = self.year + 1;
        let mut cells = std::mem::take(&mut self.cells);
        let mut results: Vec<Option<(CellTally, Vec<StandSummary>)>> = vec![None; cells.len()];
        for &pos in order {
            let (idx, cell) = &mut cells[pos];
            results[pos] = Some(self.step_one(*idx, cell, fire, year));
        }
        self.cells = cells;
        let results = results
            .into_iter()
            .map(|r| r.ok_or_else(|| Error::Config("processing order skips a cell".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish_year(year, results))
    }

    fn finish_year(&mut self, year: u32, results: Vec<(CellTally, Vec<StandSummary>)>) -> YearReport {
        self.year = year;
        let mut tallies = Vec::with_capacity(results.len());
        let mut summaries = Vec::with_capacity(results.len());
        for ((idx, _), (tally, summary)) in self.cells.iter().zip(results) {
            tallies.push((*idx, tally));
            summaries.push((*idx, summary));
        }
        let maps = self.assemble(year, &summaries);
        YearReport { tallies, maps }
    }

    /// Persisted scalars over all active cells.
    pub fn persisted_scalars(&self) -> usize {
        self.cells.iter().map(|(_, c)| E::persisted_scalars(c)).sum()
    }

    pub fn plant_count(&self) -> usize {
        self.cells.iter().map(|(_, c)| E::plant_count(c)).sum()
    }

    pub fn cell(&self, idx: usize) -> Option<&E::Cell> {
        self.cells
            .binary_search_by_key(&idx, |(i, _)| *i)
            .ok()
            .map(|p| &self.cells[p].1)
    }
}

pub fn thread_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}
