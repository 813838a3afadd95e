//! Experiment runs: the year loop, output directories and the manifest.
//!
//! Layout of a run directory:
//!
//! ```text
//! <out>/manifest.json          configuration and parameter echo, file inventory
//! <out>/trajectory.csv         landscape totals per year, one column set per engine
//! <out>/<engine>/*.asc         <variable>_<label>_<year>.asc
//! <out>/<engine>/trajectory.csv
//! <out>/<engine>/timing.json   wall-clock seconds; not deterministic
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::ThreadPool;
use serde::Serialize;

use crate::disturbance::{FireMap, FireSource};
use crate::engine::{thread_pool, CellEngine, CoarseEngine, EngineKind, FineEngine, Landscape, Simulation};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::model::SpeciesTally;
use crate::output::{MapWriter, OutputSink, Tee, Trajectory, Variable, YearMaps};
use crate::params::Parameters;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

/// Fire maps for years `1..=years`, sampled or loaded once so every engine
/// sees the same fires.
pub fn presample_fires(source: &FireSource, landscape: &Landscape, years: u32, seed: u64) -> Result<Vec<FireMap>> {
    (1..=years)
        .map(|y| source.fire_map(&landscape.terrain, landscape.rows(), landscape.cols(), y, seed))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EngineTiming {
    pub engine: String,
    pub threads: usize,
    /// Stepping time per simulated year, excluding output writing.
    pub year_seconds: Vec<f64>,
    pub output_seconds: f64,
}

impl EngineTiming {
    pub fn step_seconds(&self) -> f64 {
        self.year_seconds.iter().sum()
    }
}

/// A bookkeeping failure found while running.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TallyViolation {
    pub year: u32,
    pub cell: usize,
    pub species: usize,
    pub tally: SpeciesTally,
}

/// Population bookkeeping over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConservationCheck {
    /// Number of (cell, species, year) tallies inspected.
    pub checked: u64,
    /// Unbalanced tallies or counts above the cap.
    pub violations: Vec<TallyViolation>,
    /// Output values found on null cells.
    pub null_cell_values: u64,
}

impl ConservationCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.null_cell_values == 0
    }

    fn inspect_maps(&mut self, landscape: &Landscape, maps: &YearMaps) {
        for m in &maps.maps {
            self.null_cell_values += m
                .values
                .iter()
                .zip(&landscape.terrain)
                .filter(|(v, t)| v.is_some() && t.is_none())
                .count() as u64;
        }
    }
}

/// Runs `sim` through every fire map. Year 0 (the initial state) and each
/// subsequent year are handed to `sink` at the year barrier.
pub fn drive<E: CellEngine>(
    sim: &mut Simulation<E>,
    fires: &[FireMap],
    pool: &ThreadPool,
    sink: &mut dyn OutputSink,
) -> Result<(EngineTiming, ConservationCheck)> {
    let mut timing = EngineTiming {
        engine: E::KIND.to_string(),
        threads: pool.current_num_threads(),
        ..Default::default()
    };
    let mut check = ConservationCheck::default();

    let initial = sim.maps();
    check.inspect_maps(&sim.landscape, &initial);
    let t = Instant::now();
    sink.accept(&initial)?;
    timing.output_seconds += t.elapsed().as_secs_f64();

    for fire in fires {
        let t = Instant::now();
        let report = sim.step(fire, pool)?;
        timing.year_seconds.push(t.elapsed().as_secs_f64());

        for (cell, tally) in &report.tallies {
            for (species, st) in tally.iter().enumerate() {
                check.checked += 1;
                if !st.is_balanced() || st.n_end > sim.max_plants {
                    check.violations.push(TallyViolation {
                        year: sim.year,
                        cell: *cell,
                        species,
                        tally: *st,
                    });
                }
            }
        }
        check.inspect_maps(&sim.landscape, &report.maps);

        let t = Instant::now();
        sink.accept(&report.maps)?;
        timing.output_seconds += t.elapsed().as_secs_f64();
    }
    Ok((timing, check))
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineRun {
    pub engine: EngineKind,
    pub dir: PathBuf,
    pub timing: EngineTiming,
    pub conservation: ConservationCheck,
    pub files_written: usize,
    /// Persisted scalars at the end of the run.
    pub persisted_scalars: usize,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl EngineRun {
    pub fn final_total(&self, variable: Variable) -> f64 {
        let k = Variable::ALL.iter().position(|v| *v == variable).unwrap();
        self.trajectory.rows.last().map_or(0.0, |r| r.totals[k])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out: PathBuf,
    pub runs: Vec<EngineRun>,
}

impl RunSummary {
    pub fn get(&self, engine: EngineKind) -> Option<&EngineRun> {
        self.runs.iter().find(|r| r.engine == engine)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    seed: u64,
    engines: Vec<EngineKind>,
    years: u32,
    fire: String,
    config: &'a RunConfig,
    parameters: &'a Parameters,
    outputs: Vec<EngineInventory>,
}

#[derive(Serialize)]
struct EngineInventory {
    engine: EngineKind,
    dir: String,
    files: Vec<String>,
}

fn describe_fire(source: &FireSource) -> String {
    match source {
        FireSource::None => "none".into(),
        FireSource::Regime(r) => format!("regime ridge={} slope={} valley={}", r.ridge, r.slope, r.valley),
        FireSource::Maps(dir) => format!("maps {}", dir.display()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run_one<E: CellEngine>(
    mut sim: Simulation<E>,
    fires: &[FireMap],
    pool: &ThreadPool,
    dir: PathBuf,
) -> Result<EngineRun> {
    let mut writer = MapWriter::create(&dir, sim.landscape.raster_header())?;
    let mut trajectory = Trajectory::default();
    let (timing, conservation) = {
        let mut tee = Tee {
            sinks: vec![&mut writer, &mut trajectory],
        };
        drive(&mut sim, fires, pool, &mut tee)?
    };
    let path = dir.join(TRAJECTORY_FILE);
    fs::write(&path, trajectory.to_csv()).map_err(|e| Error::io(&path, e))?;
    write_json(&dir.join(TIMING_FILE), &timing)?;
    Ok(EngineRun {
        engine: E::KIND,
        dir,
        timing,
        conservation,
        files_written: writer.files_written(),
        persisted_scalars: sim.persisted_scalars(),
        trajectory,
    })
}

/// Landscape totals of every engine side by side.
pub fn combined_trajectory_csv(runs: &[EngineRun]) -> String {
    let mut out = String::from("year");
    for r in runs {
        out.push(',');
        out.push_str(&Trajectory::csv_header(&format!("_{}", r.engine)));
    }
    out.push('\n');
    let n = runs.iter().map(|r| r.trajectory.rows.len()).min().unwrap_or(0);
    for i in 0..n {
        out.push_str(&runs[0].trajectory.rows[i].year.to_string());
        for r in runs {
            for v in r.trajectory.rows[i].totals {
                out.push(',');
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}

fn inventory(dir: &Path) -> Result<Vec<String>> {
    let mut files: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    Ok(files)
}

/// Runs the configured engines into `cfg.out`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let params = cfg.load_params()?;
    let landscape = cfg.landscape()?;
    let source = cfg.fire_source(&params)?;
    let fires = presample_fires(&source, &landscape, cfg.years, cfg.seed)?;
    let pool = thread_pool(cfg.threads)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let fine = Simulation::<FineEngine>::initialize(params.clone(), landscape, cfg.max_plants, cfg.initial_avg, cfg.seed);
    let mut runs = Vec::new();
    for engine in cfg.engine.engines() {
        let dir = cfg.out.join(engine.name());
        let run = match engine {
            EngineKind::Fine => run_one(fine.clone(), &fires, &pool, dir)?,
            EngineKind::Coarse => run_one(Simulation::<CoarseEngine>::from_fine(&fine), &fires, &pool, dir)?,
        };
        runs.push(run);
    }

    let path = cfg.out.join(TRAJECTORY_FILE);
    fs::write(&path, combined_trajectory_csv(&runs)).map_err(|e| Error::io(&path, e))?;

    let outputs = runs
        .iter()
        .map(|r| {
            Ok(EngineInventory {
                engine: r.engine,
                dir: r.engine.name().to_string(),
                files: inventory(&r.dir)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        engines: cfg.engine.engines(),
        years: cfg.years,
        fire: describe_fire(&source),
        config: cfg,
        parameters: &params,
        outputs,
    };
    write_json(&cfg.out.join(MANIFEST_FILE), &manifest)?;
    Ok(RunSummary {
        out: cfg.out.clone(),
        runs,
    })
}
