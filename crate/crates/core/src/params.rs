//! Parameter files: species, fire regime and engine constants.
//!
//! The format is TOML; the schema is documented in `docs/params-schema.md`.
//! Unknown keys are rejected and every invariant violation names its key.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allometry::{
    EngineConstants, FunctionalType, Lifeform, SpeciesParams, TerrainFactors,
};
use crate::disturbance::FireRegime;
use crate::error::{Error, Result};

pub const DEFAULT_PARAMS_TOML: &str = include_str!("../params/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameters {
    pub species: Vec<SpeciesParams>,
    pub fire_regime: FireRegime,
    pub constants: EngineConstants,
}

impl Parameters {
    pub fn labels(&self) -> Vec<String> {
        self.species.iter().map(|s| s.label().to_string()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::param("species", "at least one species is required"));
        }
        let mut seen = HashSet::new();
        for (i, sp) in self.species.iter().enumerate() {
            let label = sp.label();
            if label.is_empty() || label.contains(['/', '\\', ' ']) || label == crate::output::TOTAL_LABEL {
                return Err(Error::param(
                    format!("species[{i}].label"),
                    format!("`{label}` is not usable in output file names"),
                ));
            }
            if !seen.insert(label.to_string()) {
                return Err(Error::param(
                    format!("species[{i}].label"),
                    format!("duplicate label `{label}`"),
                ));
            }
            sp.validate().map_err(|e| match e {
                Error::Param { key, reason } => Error::Param {
                    key: format!("species[{i}].{key}"),
                    reason,
                },
                other => other,
            })?;
        }
        self.fire_regime.validate()?;
        self.constants.validate().map_err(|e| match e {
            Error::Param { key, reason } => Error::Param {
                key: format!("constants.{key}"),
                reason,
            },
            other => other,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    #[serde(default)]
    constants: EngineConstants,
    #[serde(default)]
    fire_regime: FireRegime,
    species: Vec<SpeciesEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesEntry {
    label: String,
    lifeform: Lifeform,
    resprouter: bool,
    fire_tolerant: bool,
    h_max: f64,
    hd_a: f64,
    g_max: f64,
    d_max: f64,
    age_max: u32,
    age_adult: u32,
    c_seeds: u32,
    c_leaf: f64,
    p_b: f64,
    p_max: f64,
    g_rate: f64,
    fire_kill_frac: f64,
    #[serde(default)]
    terrain_factor: TerrainFactors,
}

impl From<SpeciesEntry> for SpeciesParams {
    fn from(e: SpeciesEntry) -> Self {
        SpeciesParams {
            functional_type: FunctionalType {
                label: e.label,
                lifeform: e.lifeform,
                resprouter: e.resprouter,
                fire_tolerant: e.fire_tolerant,
            },
            h_max: e.h_max,
            hd_a: e.hd_a,
            g_max: e.g_max,
            d_max: e.d_max,
            age_max: e.age_max,
            age_adult: e.age_adult,
            c_seeds: e.c_seeds,
            c_leaf: e.c_leaf,
            p_b: e.p_b,
            p_max: e.p_max,
            g_rate: e.g_rate,
            fire_kill_frac: e.fire_kill_frac,
            terrain_factor: e.terrain_factor,
        }
    }
}

/// Parses and validates a parameter document.
pub fn parse_params(text: &str) -> Result<Parameters> {
    let file: ParamFile = toml::from_str(text).map_err(|e| Error::ParamParse {
        path: "<memory>".into(),
        message: e.message().to_string(),
    })?;
    let params = Parameters {
        species: file.species.into_iter().map(SpeciesParams::from).collect(),
        fire_regime: file.fire_regime,
        constants: file.constants,
    };
    params.validate()?;
    Ok(params)
}

pub fn read_params(path: &Path) -> Result<Parameters> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_params(&text).map_err(|e| match e {
        Error::ParamParse { message, .. } => Error::ParamParse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// The shipped parameter set for Quercus, Erica, Pinus and Cistus.
pub fn default_params() -> Parameters {
    parse_params(DEFAULT_PARAMS_TOML).expect("shipped parameter file is valid")
}
