//! The mapping from individual-plant state to cohort state.

use crate::coarse::{CoarseCell, Cohort};
use crate::fine::{FineCell, FineStand};

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean taken about the first value, so identical values average to
/// themselves exactly. Zero for an empty slice.
pub fn shifted_mean(values: &[f64]) -> f64 {
    let Some(&x0) = values.first() else {
        return 0.0;
    };
    x0 + neumaier_sum(values.iter().map(|&x| x - x0)) / values.len() as f64
}

/// Count, mean diameter and mean age of one stand; the seed bank passes through.
pub fn abstract_stand(stand: &FineStand) -> Cohort {
    let n = stand.plants.len();
    if n == 0 {
        return Cohort {
            seed_bank: stand.seed_bank,
            ..Cohort::default()
        };
    }
    let d: Vec<f64> = stand.plants.iter().map(|p| p.diameter).collect();
    let age: Vec<f64> = stand.plants.iter().map(|p| f64::from(p.age)).collect();
    Cohort {
        n_plants: n as u32,
        d_ave: shifted_mean(&d),
        age_ave: shifted_mean(&age),
        seed_bank: stand.seed_bank,
    }
}

/// `H`: fine cell to coarse cell. Dead biomass is carried over.
pub fn abstraction_map(cell: &FineCell) -> CoarseCell {
    CoarseCell {
        terrain: cell.terrain,
        cohorts: cell.stands.iter().map(abstract_stand).collect(),
        dead_biomass: cell.dead_biomass.clone(),
    }
}
