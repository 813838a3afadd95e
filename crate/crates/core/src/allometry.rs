//! Shared domain types and per-plant allometry.
//!
//! Units throughout: diameter in cm, height in m, areas in m². Basal area is
//! computed in cm² and converted to m².

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CM2_PER_M2: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainType {
    Ridge,
    Slope,
    Valley,
}

impl TerrainType {
    pub const ALL: [TerrainType; 3] = [TerrainType::Ridge, TerrainType::Slope, TerrainType::Valley];

    /// Integer code used in terrain rasters.
    pub fn code(self) -> u8 {
        match self {
            TerrainType::Ridge => 1,
            TerrainType::Slope => 2,
            TerrainType::Valley => 3,
        }
    }

    pub fn from_code(code: f64) -> Option<Self> {
        match code {
            c if c == 1.0 => Some(TerrainType::Ridge),
            c if c == 2.0 => Some(TerrainType::Slope),
            c if c == 3.0 => Some(TerrainType::Valley),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainType::Ridge => "ridge",
            TerrainType::Slope => "slope",
            TerrainType::Valley => "valley",
        }
    }
}

impl fmt::Display for TerrainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ridge" => Ok(TerrainType::Ridge),
            "slope" => Ok(TerrainType::Slope),
            "valley" => Ok(TerrainType::Valley),
            other => Err(Error::Config(format!("unknown terrain type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lifeform {
    Tree,
    Shrub,
}

/// Lifeform crossed with fire-response strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalType {
    pub label: String,
    pub lifeform: Lifeform,
    pub resprouter: bool,
    pub fire_tolerant: bool,
}

/// Growth or germination multiplier per terrain type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainFactors {
    pub ridge: f64,
    pub slope: f64,
    pub valley: f64,
}

impl TerrainFactors {
    pub fn get(&self, terrain: TerrainType) -> f64 {
        match terrain {
            TerrainType::Ridge => self.ridge,
            TerrainType::Slope => self.slope,
            TerrainType::Valley => self.valley,
        }
    }

    pub fn max(&self) -> f64 {
        self.ridge.max(self.slope).max(self.valley)
    }
}

impl Default for TerrainFactors {
    fn default() -> Self {
        TerrainFactors {
            ridge: 0.8,
            slope: 1.0,
            valley: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesParams {
    #[serde(flatten)]
    pub functional_type: FunctionalType,
    /// Asymptotic height (m).
    pub h_max: f64,
    /// Height-diameter shape coefficient (1/cm).
    pub hd_a: f64,
    /// Maximum annual diameter increment (cm/yr).
    pub g_max: f64,
    /// Maximum diameter (cm).
    pub d_max: f64,
    pub age_max: u32,
    /// Age at which a plant starts producing seeds.
    pub age_adult: u32,
    /// Seeds per mature plant per year.
    pub c_seeds: u32,
    /// Leaf area per squared diameter (m²/cm²).
    pub c_leaf: f64,
    /// Annual mortality probability of a newborn plant.
    pub p_b: f64,
    /// Annual mortality probability approaching `age_max`.
    pub p_max: f64,
    /// Fraction of the seed bank germinating per year.
    pub g_rate: f64,
    pub fire_kill_frac: f64,
    pub terrain_factor: TerrainFactors,
}

impl SpeciesParams {
    pub fn label(&self) -> &str {
        &self.functional_type.label
    }

    /// Checks every parameter invariant, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h_max", self.h_max),
            ("hd_a", self.hd_a),
            ("g_max", self.g_max),
            ("d_max", self.d_max),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(key, format!("must be > 0, got {value}")));
            }
        }
        if !(self.c_leaf.is_finite() && self.c_leaf >= 0.0) {
            return Err(Error::param("c_leaf", "must be >= 0"));
        }
        if self.age_adult == 0 {
            return Err(Error::param("age_adult", "must be > 0"));
        }
        if self.age_adult >= self.age_max {
            return Err(Error::param(
                "age_adult",
                format!("must be < age_max ({}), got {}", self.age_max, self.age_adult),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_b) {
            return Err(Error::param("p_b", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            return Err(Error::param("p_max", "must lie in [0, 1]"));
        }
        if self.p_b > self.p_max {
            return Err(Error::param(
                "p_b",
                format!("must be <= p_max ({}), got {}", self.p_max, self.p_b),
            ));
        }
        if !(0.0..=1.0).contains(&self.g_rate) {
            return Err(Error::param("g_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.fire_kill_frac) {
            return Err(Error::param("fire_kill_frac", "must lie in [0, 1]"));
        }
        for t in TerrainType::ALL {
            let f = self.terrain_factor.get(t);
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::param(
                    format!("terrain_factor.{}", t.name()),
                    "must be >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// Engine-wide constants shared by both resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConstants {
    /// Basal area per unit ground area at full crowding (m²/m²).
    pub ba_max_frac: f64,
    /// Light extinction coefficient applied to leaf area per ground area.
    pub k_shade: f64,
    /// Diameter of a new germinant (cm).
    pub seedling_diameter: f64,
    /// Biomass per diameter^2.5 (kg/cm^2.5).
    pub biomass_coef: f64,
    /// Fraction of dead biomass lost per year.
    pub dead_biomass_decay: f64,
    /// Relative offset of the mean age of plants dying naturally in a cohort.
    pub death_age_bias: f64,
    /// Standard deviation of the dead-plant attribute draw, relative to the cohort mean.
    pub death_sd_frac: f64,
    pub init_diameter_min: f64,
    pub init_diameter_max: f64,
    pub init_age_max: u32,
}

impl Default for EngineConstants {
    fn default() -> Self {
        EngineConstants {
            ba_max_frac: 0.04,
            k_shade: 0.4,
            seedling_diameter: 0.5,
            biomass_coef: 0.03,
            dead_biomass_decay: 0.1,
            death_age_bias: 0.1,
            death_sd_frac: 0.15,
            init_diameter_min: 0.5,
            init_diameter_max: 5.0,
            init_age_max: 10,
        }
    }
}

impl EngineConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ba_max_frac", self.ba_max_frac),
            ("seedling_diameter", self.seedling_diameter),
            ("init_diameter_min", self.init_diameter_min),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(key, "must be > 0"));
            }
        }
        let non_negative = [
            ("k_shade", self.k_shade),
            ("biomass_coef", self.biomass_coef),
            ("death_age_bias", self.death_age_bias),
            ("death_sd_frac", self.death_sd_frac),
        ];
        for (key, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::param(key, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.dead_biomass_decay) {
            return Err(Error::param("dead_biomass_decay", "must lie in [0, 1]"));
        }
        if !(self.init_diameter_max >= self.init_diameter_min) {
            return Err(Error::param(
                "init_diameter_max",
                "must be >= init_diameter_min",
            ));
        }
        if self.init_age_max == 0 {
            return Err(Error::param("init_age_max", "must be >= 1"));
        }
        Ok(())
    }
}

/// Grid shape, cell size and null mask of a landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Cell area (m²).
    pub cell_area: f64,
    /// `true` where the cell is null and never holds vegetation.
    pub null_mask: Vec<bool>,
}

impl LandscapeGeometry {
    pub fn new(rows: usize, cols: usize, cell_area: f64, null_mask: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("rows and cols must be positive".into()));
        }
        if !(cell_area.is_finite() && cell_area > 0.0) {
            return Err(Error::Config(format!("cell_area must be > 0, got {cell_area}")));
        }
        if null_mask.len() != rows * cols {
            return Err(Error::Geometry(format!(
                "null mask has {} entries, expected {}",
                null_mask.len(),
                rows * cols
            )));
        }
        Ok(LandscapeGeometry {
            rows,
            cols,
            cell_area,
            null_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn active_count(&self) -> usize {
        self.null_mask.iter().filter(|&&n| !n).count()
    }
}

fn check_diameter(d: f64) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        Err(Error::Domain(format!("diameter must be >= 0, got {d}")))
    } else {
        Ok(())
    }
}

/// Plant height (m) from stem diameter (cm).
pub fn height(d: f64, p: &SpeciesParams) -> Result<f64> {
    check_diameter(d)?;
    Ok(height_unchecked(d, p))
}

#[inline]
pub(crate) fn height_unchecked(d: f64, p: &SpeciesParams) -> f64 {
    p.h_max * (-(-p.hd_a * d).exp_m1())
}

/// Basal area (m²) of a single stem of diameter `d` cm.
pub fn basal_area_single(d: f64) -> Result<f64> {
    check_diameter(d)?;
    Ok(basal_area_unchecked(d))
}

#[inline]
pub(crate) fn basal_area_unchecked(d: f64) -> f64 {
    FRAC_PI_4 * d * d / CM2_PER_M2
}

/// Leaf area (m²) of a single plant.
pub fn leaf_area_single(d: f64, p: &SpeciesParams) -> Result<f64> {
    check_diameter(d)?;
    Ok(leaf_area_unchecked(d, p))
}

#[inline]
pub(crate) fn leaf_area_unchecked(d: f64, p: &SpeciesParams) -> f64 {
    p.c_leaf * d * d
}

/// Above-ground biomass (kg) of a single plant.
#[inline]
pub fn biomass_single(d: f64, constants: &EngineConstants) -> f64 {
    constants.biomass_coef * d * d * d.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFactors {
    pub space: f64,
    pub light: f64,
    pub resp: f64,
}

impl GrowthFactors {
    pub const UNLIMITED: GrowthFactors = GrowthFactors {
        space: 1.0,
        light: 1.0,
        resp: 1.0,
    };

    pub fn product(&self) -> f64 {
        self.space * self.light * self.resp
    }
}

/// Crowding, shading and size limits on growth, each clipped to [0, 1].
///
/// `ba_cell` is the basal area of the whole cell (m²), `la_above` the leaf
/// area (m²) held by plants taller than the one being grown.
pub fn growth_factors(
    ba_cell: f64,
    la_above: f64,
    d: f64,
    p: &SpeciesParams,
    cell_area: f64,
    constants: &EngineConstants,
) -> Result<GrowthFactors> {
    for (name, v) in [("ba_cell", ba_cell), ("la_above", la_above), ("d", d)] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    if !(cell_area > 0.0) {
        return Err(Error::Domain(format!("cell_area must be > 0, got {cell_area}")));
    }
    Ok(growth_factors_unchecked(ba_cell, la_above, d, p, cell_area, constants))
}

#[inline]
pub(crate) fn growth_factors_unchecked(
    ba_cell: f64,
    la_above: f64,
    d: f64,
    p: &SpeciesParams,
    cell_area: f64,
    constants: &EngineConstants,
) -> GrowthFactors {
    let space = 1.0 - ba_cell / (constants.ba_max_frac * cell_area);
    let light = (-constants.k_shade * la_above / cell_area).exp();
    let resp = 1.0 - d / p.d_max;
    GrowthFactors {
        space: space.clamp(0.0, 1.0),
        light: light.clamp(0.0, 1.0),
        resp: resp.clamp(0.0, 1.0),
    }
}

/// Annual diameter increment (cm/yr).
pub fn growth_increment(factors: GrowthFactors, p: &SpeciesParams, terrain: TerrainType) -> f64 {
    p.g_max * factors.product() * p.terrain_factor.get(terrain)
}

/// Annual probability of natural death at the given age.
///
/// Linear in age between `p_b` and `p_max`; plants at or beyond `age_max`
/// die with certainty.
pub fn mortality_probability(age: f64, p: &SpeciesParams) -> f64 {
    let age_max = f64::from(p.age_max);
    if age >= age_max {
        return 1.0;
    }
    let raw = p.p_b + (p.p_max - p.p_b) * (age / age_max);
    raw.clamp(p.p_b, p.p_max)
}

/// Germination fraction of the seed bank on the given terrain, clipped to 1.
pub fn germination_probability(p: &SpeciesParams, terrain: TerrainType) -> f64 {
    (p.g_rate * p.terrain_factor.get(terrain)).clamp(0.0, 1.0)
}
