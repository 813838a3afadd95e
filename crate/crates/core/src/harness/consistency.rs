//! One-step consistency of the abstraction map.
//!
//! For a fine cell `s` and one phase `δ`, compares `H(δ_fine(s))` with
//! `δ_coarse(H(s))` field by field. Stochastic phases are compared in
//! expectation over `samples` independent streams, with standard errors.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::abstraction::abstraction_map;
use crate::coarse::{
    apply_fire_coarse, germinate_coarse, grow_cohorts, natural_death_coarse, seed_bank_coarse, CoarseCell,
};
use crate::error::{Error, Result};
use crate::fine::{apply_fire_fine, germinate_fine, grow_plants_fine, natural_death_fine, update_seed_bank_fine, FineCell};
use crate::model::Site;
use crate::params::Parameters;
use crate::rng::{stream, Phase};

pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyPhase {
    Growth,
    Fire,
    NaturalDeath,
    Germination,
    SeedBank,
}

impl ConsistencyPhase {
    pub const ALL: [ConsistencyPhase; 5] = [
        ConsistencyPhase::Growth,
        ConsistencyPhase::Fire,
        ConsistencyPhase::NaturalDeath,
        ConsistencyPhase::Germination,
        ConsistencyPhase::SeedBank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConsistencyPhase::Growth => "growth",
            ConsistencyPhase::Fire => "fire",
            ConsistencyPhase::NaturalDeath => "natural-death",
            ConsistencyPhase::Germination => "germination",
            ConsistencyPhase::SeedBank => "seed-bank",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            ConsistencyPhase::Fire | ConsistencyPhase::NaturalDeath | ConsistencyPhase::Germination
        )
    }

    fn rng_phase(self) -> Phase {
        match self {
            ConsistencyPhase::Fire => Phase::Fire,
            ConsistencyPhase::NaturalDeath => Phase::NaturalDeath,
            _ => Phase::Germination,
        }
    }
}

impl fmt::Display for ConsistencyPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsistencyPhase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConsistencyPhase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown phase `{s}`")))
    }
}

pub const FIELDS: [&str; 4] = ["n_plants", "d_ave", "age_ave", "seed_bank"];

/// Cohort fields of every species, flattened in `FIELDS` order.
pub fn cohort_fields(cell: &CoarseCell) -> Vec<f64> {
    cell.cohorts
        .iter()
        .flat_map(|c| [f64::from(c.n_plants), c.d_ave, c.age_ave, c.seed_bank as f64])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDiscrepancy {
    pub species: String,
    pub field: &'static str,
    /// Mean of `H(δ_fine(s))`.
    pub fine: f64,
    /// Mean of `δ_coarse(H(s))`.
    pub coarse: f64,
    pub fine_stderr: f64,
    pub coarse_stderr: f64,
    /// `fine - coarse`.
    pub difference: f64,
    /// `|fine - coarse| / max(|fine|, |coarse|, 1e-9)`.
    pub relative: f64,
}

impl FieldDiscrepancy {
    /// Standard error of `difference`, treating the two means as independent.
    pub fn stderr(&self) -> f64 {
        self.fine_stderr.hypot(self.coarse_stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRecord {
    pub phase: ConsistencyPhase,
    pub samples: usize,
    pub fields: Vec<FieldDiscrepancy>,
}

impl ConsistencyRecord {
    pub fn field(&self, species: &str, field: &str) -> Option<&FieldDiscrepancy> {
        self.fields
            .iter()
            .find(|f| f.species == species && f.field == field)
    }

    pub fn max_relative(&self) -> f64 {
        self.fields.iter().map(|f| f.relative).fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: usize,
}

impl Moments {
    fn push(&mut self, x: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; x.len()];
            self.sum_sq = vec![0.0; x.len()];
        }
        for (k, v) in x.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
        self.n += 1;
    }

    fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.n as f64
    }

    fn stderr(&self, k: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean(k);
        let var = ((self.sum_sq[k] - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

fn fine_step(phase: ConsistencyPhase, cell: &mut FineCell, params: &Parameters, site: &Site, sample: u64, seed: u64) {
    let mut rng = stream(seed, sample, 0, phase.rng_phase());
    match phase {
        ConsistencyPhase::Growth => grow_plants_fine(cell, params, site),
        ConsistencyPhase::Fire => {
            apply_fire_fine(cell, params, true, &mut rng);
        }
        ConsistencyPhase::NaturalDeath => {
            natural_death_fine(cell, params, &mut rng, None);
        }
        ConsistencyPhase::Germination => {
            germinate_fine(cell, params, site, &mut rng);
        }
        ConsistencyPhase::SeedBank => update_seed_bank_fine(cell, params),
    }
}

fn coarse_step(phase: ConsistencyPhase, cell: &mut CoarseCell, params: &Parameters, site: &Site, sample: u64, seed: u64) {
    // a stream disjoint from the fine side's
    let mut rng = stream(seed ^ 0x9e37_79b9_7f4a_7c15, sample, 0, phase.rng_phase());
    let c = &params.constants;
    match phase {
        ConsistencyPhase::Growth => grow_cohorts(cell, params, site),
        ConsistencyPhase::Fire => {
            for (co, sp) in cell.cohorts.iter_mut().zip(&params.species) {
                apply_fire_coarse(co, sp, c, true, &mut rng);
            }
        }
        ConsistencyPhase::NaturalDeath => {
            for (co, sp) in cell.cohorts.iter_mut().zip(&params.species) {
                natural_death_coarse(co, sp, c, &mut rng);
            }
        }
        ConsistencyPhase::Germination => {
            for (co, sp) in cell.cohorts.iter_mut().zip(&params.species) {
                germinate_coarse(co, sp, c, site.terrain, site.max_plants, &mut rng);
            }
        }
        ConsistencyPhase::SeedBank => {
            for (co, sp) in cell.cohorts.iter_mut().zip(&params.species) {
                seed_bank_coarse(co, sp);
            }
        }
    }
}

/// Compares `H(δ_fine(s))` with `δ_coarse(H(s))` for one phase. Deterministic
/// phases use a single evaluation regardless of `samples`.
pub fn one_step_consistency(
    cell: &FineCell,
    phase: ConsistencyPhase,
    params: &Parameters,
    site: &Site,
    samples: usize,
    seed: u64,
) -> ConsistencyRecord {
    let samples = if phase.is_stochastic() { samples.max(1) } else { 1 };
    let abstracted = abstraction_map(cell);
    let mut fine = Moments::default();
    let mut coarse = Moments::default();
    for i in 0..samples as u64 {
        let mut f = cell.clone();
        fine_step(phase, &mut f, params, site, i, seed);
        fine.push(&cohort_fields(&abstraction_map(&f)));

        let mut c = abstracted.clone();
        coarse_step(phase, &mut c, params, site, i, seed);
        coarse.push(&cohort_fields(&c));
    }

    let labels = params.labels();
    let mut fields = Vec::with_capacity(labels.len() * FIELDS.len());
    for (s, label) in labels.iter().enumerate() {
        for (j, name) in FIELDS.iter().enumerate() {
            let k = s * FIELDS.len() + j;
            let (f, c) = (fine.mean(k), coarse.mean(k));
            fields.push(FieldDiscrepancy {
                species: label.clone(),
                field: name,
                fine: f,
                coarse: c,
                fine_stderr: fine.stderr(k),
                coarse_stderr: coarse.stderr(k),
                difference: f - c,
                relative: (f - c).abs() / f.abs().max(c.abs()).max(1e-9),
            });
        }
    }
    ConsistencyRecord {
        phase,
        samples,
        fields,
    }
}
