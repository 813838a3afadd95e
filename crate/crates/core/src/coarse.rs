//! Cohort engine: one aggregate record per species per cell.
//!
//! A cohort carries the plant count, the mean diameter and mean age, and the
//! seed bank. Phases run in the same order as the individual-plant engine.
//! Removing plants uses the mean-update rule
//! `x_ave <- (x_ave * n_orig - x_dead * n_dead) / n_next`.

use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::allometry::{
    basal_area_unchecked, biomass_single, growth_factors_unchecked, growth_increment,
    height_unchecked, leaf_area_unchecked, mortality_probability, EngineConstants,
    SpeciesParams, TerrainType,
};
use crate::fine::draw_germinants;
use crate::model::{CellTally, Site, SpeciesTally};
use crate::output::StandSummary;
use crate::params::Parameters;
use crate::rng::{Phase, Stream, StreamKey};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cohort {
    pub n_plants: u32,
    /// Mean diameter (cm); 0 when empty.
    pub d_ave: f64,
    /// Mean age (yr); 0 when empty.
    pub age_ave: f64,
    pub seed_bank: u64,
}

impl Cohort {
    pub fn is_empty(&self) -> bool {
        self.n_plants == 0
    }

    /// Sum of diameters, `n * d_ave`.
    pub fn d_total(&self) -> f64 {
        f64::from(self.n_plants) * self.d_ave
    }

    fn clear(&mut self) {
        self.n_plants = 0;
        self.d_ave = 0.0;
        self.age_ave = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseCell {
    pub terrain: TerrainType,
    /// One cohort per species, in parameter order.
    pub cohorts: Vec<Cohort>,
    /// Standing dead biomass per species (kg).
    pub dead_biomass: Vec<f64>,
}

impl CoarseCell {
    pub fn empty(terrain: TerrainType, n_species: usize) -> Self {
        CoarseCell {
            terrain,
            cohorts: vec![Cohort::default(); n_species],
            dead_biomass: vec![0.0; n_species],
        }
    }

    pub fn plant_count(&self) -> usize {
        self.cohorts.iter().map(|c| c.n_plants as usize).sum()
    }

    /// Persisted scalars: count, mean diameter, mean age and seed bank per cohort.
    pub fn persisted_scalars(&self) -> usize {
        4 * self.cohorts.len()
    }
}

/// Result of removing plants from a cohort.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Removal {
    pub n_dead: u32,
    pub age_dead: f64,
    pub d_dead: f64,
    /// kg
    pub dead_biomass: f64,
}

/// Removes `n_dead` plants of mean age `age_dead` and mean diameter `d_dead`.
/// The updated means are clipped to the attainable range.
pub fn remove_plants(c: &mut Cohort, n_dead: u32, age_dead: f64, d_dead: f64, p: &SpeciesParams, constants: &EngineConstants) {
    if n_dead == 0 {
        return;
    }
    if n_dead >= c.n_plants {
        c.clear();
        return;
    }
    let n = f64::from(c.n_plants);
    let dead = f64::from(n_dead);
    let next = n - dead;
    let age = (c.age_ave * n - age_dead * dead) / next;
    let d = (c.d_ave * n - d_dead * dead) / next;
    let d_floor = constants.seedling_diameter.min(c.d_ave).min(p.d_max);
    c.age_ave = age.clamp(1.0, f64::from(p.age_max));
    c.d_ave = d.clamp(d_floor, p.d_max);
    c.n_plants -= n_dead;
}

/// Draws the mean attribute of the plants that died: normal around
/// `mean * (1 + bias)` with sd `sd_frac * mean`, clipped to `[lo, hi]`.
fn draw_dead_mean(mean: f64, bias: f64, sd_frac: f64, lo: f64, hi: f64, rng: &mut Stream) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (mean * (1.0 + bias) + sd_frac * mean * z).clamp(lo, hi)
}

fn kill(
    c: &mut Cohort,
    n_dead: u32,
    bias: f64,
    p: &SpeciesParams,
    constants: &EngineConstants,
    rng: &mut Stream,
) -> Removal {
    if n_dead == 0 {
        return Removal::default();
    }
    let age_max = f64::from(p.age_max);
    let (age_dead, d_dead) = if n_dead >= c.n_plants {
        (c.age_ave, c.d_ave)
    } else {
        let a = draw_dead_mean(c.age_ave, bias, constants.death_sd_frac, 1.0, age_max, rng);
        let d_lo = constants.seedling_diameter.min(p.d_max);
        let d = draw_dead_mean(c.d_ave, bias, constants.death_sd_frac, d_lo, p.d_max, rng);
        (a, d)
    };
    let n_dead = n_dead.min(c.n_plants);
    let dead_biomass = f64::from(n_dead) * biomass_single(d_dead, constants);
    remove_plants(c, n_dead, age_dead, d_dead, p, constants);
    Removal {
        n_dead,
        age_dead,
        d_dead,
        dead_biomass,
    }
}

/// Fire: `Binomial(n, fire_kill_frac)` deaths whose mean age and diameter
/// are drawn around the cohort means (fire kills regardless of age or size).
pub fn apply_fire_coarse(
    c: &mut Cohort,
    p: &SpeciesParams,
    constants: &EngineConstants,
    burning: bool,
    rng: &mut Stream,
) -> Removal {
    if !burning || c.is_empty() {
        return Removal::default();
    }
    let n_dead = Binomial::new(u64::from(c.n_plants), p.fire_kill_frac)
        .expect("probability in [0, 1]")
        .sample(rng) as u32;
    kill(c, n_dead, 0.0, p, constants, rng)
}

/// Natural death: `Binomial(n, p(age_ave))` deaths; the dead are assumed
/// older (and larger) than average by `death_age_bias`.
pub fn natural_death_coarse(c: &mut Cohort, p: &SpeciesParams, constants: &EngineConstants, rng: &mut Stream) -> Removal {
    if c.is_empty() {
        return Removal::default();
    }
    let prob = mortality_probability(c.age_ave, p);
    let n_dead = Binomial::new(u64::from(c.n_plants), prob)
        .expect("probability in [0, 1]")
        .sample(rng) as u32;
    kill(c, n_dead, constants.death_age_bias, p, constants, rng)
}

/// Cohort basal area (m²) from the mean diameter.
pub fn basal_area_coarse(c: &Cohort) -> f64 {
    f64::from(c.n_plants) * basal_area_unchecked(c.d_ave)
}

/// Cohort leaf area (m²) from the mean diameter.
pub fn leaf_area_coarse(c: &Cohort, p: &SpeciesParams) -> f64 {
    f64::from(c.n_plants) * leaf_area_unchecked(c.d_ave, p)
}

/// Leaf area above height `h`, assuming each cohort's leaves are spread
/// linearly from the ground to the height of its mean plant.
pub fn leaf_area_above_coarse(cohorts: &[Cohort], species: &[SpeciesParams], h: f64) -> f64 {
    cohorts
        .iter()
        .zip(species)
        .filter(|(c, _)| !c.is_empty())
        .map(|(c, sp)| {
            let la = leaf_area_coarse(c, sp);
            let top = height_unchecked(c.d_ave, sp);
            if h <= 0.0 {
                la
            } else if h >= top {
                0.0
            } else {
                la * (1.0 - h / top)
            }
        })
        .sum()
}

/// Diameter increment of every cohort's mean plant; 0 for empty cohorts.
pub fn cohort_growth_increments(cell: &CoarseCell, params: &Parameters, site: &Site) -> Vec<f64> {
    let ba_cell: f64 = cell.cohorts.iter().map(basal_area_coarse).sum();
    cell.cohorts
        .iter()
        .zip(&params.species)
        .map(|(c, sp)| {
            if c.is_empty() {
                return 0.0;
            }
            let h = height_unchecked(c.d_ave, sp);
            let la_above = leaf_area_above_coarse(&cell.cohorts, &params.species, h);
            let f = growth_factors_unchecked(ba_cell, la_above, c.d_ave, sp, site.cell_area, &params.constants);
            growth_increment(f, sp, site.terrain)
        })
        .collect()
}

/// `d_total += increment * n` (so `d_ave += increment`), capped at `d_max`;
/// `age_ave += 1`.
pub fn grow_cohort(c: &mut Cohort, increment: f64, p: &SpeciesParams) {
    if c.is_empty() {
        return;
    }
    c.d_ave = (c.d_ave + increment).min(p.d_max);
    c.age_ave += 1.0;
}

pub fn grow_cohorts(cell: &mut CoarseCell, params: &Parameters, site: &Site) {
    let incs = cohort_growth_increments(cell, params, site);
    for ((c, sp), inc) in cell.cohorts.iter_mut().zip(&params.species).zip(incs) {
        grow_cohort(c, inc, sp);
    }
}

/// Germination from the seed bank; new plants enter at seedling diameter and
/// age 1 and are merged into the means.
pub fn germinate_coarse(
    c: &mut Cohort,
    p: &SpeciesParams,
    constants: &EngineConstants,
    terrain: TerrainType,
    max_plants: u32,
    rng: &mut Stream,
) -> u32 {
    let n_germ = draw_germinants(c.seed_bank, c.n_plants, p, terrain, max_plants, rng);
    if n_germ == 0 {
        return 0;
    }
    let d0 = constants.seedling_diameter.min(p.d_max);
    let n = f64::from(c.n_plants);
    let g = f64::from(n_germ);
    if c.is_empty() {
        c.d_ave = d0;
        c.age_ave = 1.0;
    } else {
        c.d_ave = (c.d_ave * n + d0 * g) / (n + g);
        c.age_ave = (c.age_ave * n + g) / (n + g);
    }
    c.n_plants += n_germ;
    c.seed_bank -= u64::from(n_germ);
    n_germ
}

/// All plants count as mature when the mean age reaches `age_adult`.
pub fn seed_bank_coarse(c: &mut Cohort, p: &SpeciesParams) {
    let mature = if !c.is_empty() && c.age_ave >= f64::from(p.age_adult) {
        u64::from(c.n_plants)
    } else {
        0
    };
    c.seed_bank = mature * u64::from(p.c_seeds);
}

/// Advances one cell by one year.
pub fn step_cell_coarse(
    cell: &mut CoarseCell,
    params: &Parameters,
    site: &Site,
    key: StreamKey,
    burning: bool,
) -> CellTally {
    let c = &params.constants;
    let mut tally: CellTally = cell
        .cohorts
        .iter()
        .map(|co| SpeciesTally {
            n_start: co.n_plants,
            ..Default::default()
        })
        .collect();

    let keep = 1.0 - c.dead_biomass_decay;
    for db in cell.dead_biomass.iter_mut() {
        *db *= keep;
    }

    let mut rng = key.stream(Phase::Fire);
    for (k, (co, sp)) in cell.cohorts.iter_mut().zip(&params.species).enumerate() {
        let r = apply_fire_coarse(co, sp, c, burning, &mut rng);
        tally[k].fire_dead = r.n_dead;
        cell.dead_biomass[k] += r.dead_biomass;
    }

    let incs = cohort_growth_increments(cell, params, site);

    let mut rng = key.stream(Phase::NaturalDeath);
    for (k, (co, sp)) in cell.cohorts.iter_mut().zip(&params.species).enumerate() {
        let r = natural_death_coarse(co, sp, c, &mut rng);
        tally[k].natural_dead = r.n_dead;
        cell.dead_biomass[k] += r.dead_biomass;
    }

    for ((co, sp), inc) in cell.cohorts.iter_mut().zip(&params.species).zip(incs) {
        grow_cohort(co, inc, sp);
    }

    let mut rng = key.stream(Phase::Germination);
    for (k, (co, sp)) in cell.cohorts.iter_mut().zip(&params.species).enumerate() {
        tally[k].germinated = germinate_coarse(co, sp, c, site.terrain, site.max_plants, &mut rng);
    }

    for ((co, sp), t) in cell.cohorts.iter_mut().zip(&params.species).zip(tally.iter_mut()) {
        seed_bank_coarse(co, sp);
        t.n_end = co.n_plants;
    }
    tally
}

pub fn summarize_coarse(cell: &CoarseCell, params: &Parameters) -> Vec<StandSummary> {
    cell.cohorts
        .iter()
        .zip(&params.species)
        .zip(&cell.dead_biomass)
        .map(|((co, sp), &dead)| {
            let n = f64::from(co.n_plants);
            StandSummary {
                density: n,
                basal_area: basal_area_coarse(co),
                biomass: n * biomass_single(co.d_ave, &params.constants),
                leaf_area: leaf_area_coarse(co, sp),
                seed_bank: co.seed_bank as f64,
                dead_biomass: dead,
            }
        })
        .collect()
}
