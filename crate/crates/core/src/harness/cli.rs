//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{thread_pool, CoarseEngine, FineEngine, Simulation};
use crate::error::{Error, Result};
use crate::harness::bench::{benchmark, BenchOptions};
use crate::harness::cardinality::state_cardinality;
use crate::harness::compare::compare_runs;
use crate::harness::config::{EngineSelection, RunConfig, TerrainSource};
use crate::harness::consistency::{one_step_consistency, ConsistencyPhase, DEFAULT_SAMPLES};
use crate::harness::run::{presample_fires, run_experiment};
use crate::model::Site;
use crate::output::Variable;
use crate::raster::read_raster;

#[derive(Debug, Parser)]
#[command(name = "vlsim", version, about = "Fine- and coarse-grain vegetation landscape simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one or both engines and write output maps.
    Run(ScenarioArgs),
    /// Compare two engine output directories.
    Compare(CompareArgs),
    /// One-step consistency of the fine-to-coarse abstraction.
    Consistency(ConsistencyArgs),
    /// Time both engines on identical inputs.
    Bench(BenchArgs),
    /// Report persisted-state sizes of both engines.
    Cardinality(ScenarioArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Built-in configuration: single-cell, 5k or 20k.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML parameter file (species, fire regime, constants).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Terrain raster (1 ridge, 2 slope, 3 valley, * null).
    #[arg(long)]
    terrain: Option<PathBuf>,
    /// Directory of fire_<year>.asc maps.
    #[arg(long)]
    fires: Option<PathBuf>,
    /// Sample fires from the parameter file's regime.
    #[arg(long)]
    fire_regime: bool,
    /// Disable fires.
    #[arg(long, conflicts_with_all = ["fires", "fire_regime"])]
    no_fire: bool,
    /// Use the fire maps when both maps and a regime are configured.
    #[arg(long)]
    fires_precedence: bool,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<EngineSelection>,
    #[arg(long)]
    years: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Maximum plants per species per cell.
    #[arg(long)]
    max_plants: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_engine(s: &str) -> std::result::Result<EngineSelection, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_phases(s: &str) -> Result<Vec<ConsistencyPhase>> {
    if s == "all" {
        return Ok(ConsistencyPhase::ALL.to_vec());
    }
    Ok(vec![s.parse()?])
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Engine output directory, or a run directory holding fine/ and coarse/.
    a: PathBuf,
    /// Second engine output directory.
    b: Option<PathBuf>,
    /// Where to write report.json and mard.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// growth, fire, natural-death, germination, seed-bank or all.
    #[arg(long, default_value = "all")]
    phase: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Cell index (row-major); the first active cell by default.
    #[arg(long)]
    cell: Option<usize>,
    /// Years of fine simulation before the check.
    #[arg(long, default_value_t = 0)]
    warmup: u32,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Untimed years before timing.
    #[arg(long, default_value_t = 0)]
    warmup: u32,
    /// Comma-separated thread counts to time.
    #[arg(long, value_delimiter = ',')]
    thread_sweep: Vec<usize>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::from_toml_file(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::preset("single-cell")?,
        };
        if let Some(p) = &self.params {
            cfg.params = Some(p.clone());
        }
        if let Some(path) = &self.terrain {
            let r = read_raster(path)?;
            cfg.rows = r.header.rows;
            cfg.cols = r.header.cols;
            cfg.cell_area = r.header.cell_area();
            cfg.terrain = TerrainSource::File { path: path.clone() };
        }
        if self.no_fire {
            cfg.fire_regime = false;
            cfg.fire_maps = None;
        }
        if let Some(dir) = &self.fires {
            cfg.fire_maps = Some(dir.clone());
            cfg.fire_regime = self.fire_regime;
        } else if self.fire_regime {
            cfg.fire_regime = true;
        }
        if self.fires_precedence {
            cfg.fire_maps_precedence = true;
        }
        if let Some(e) = self.engine {
            cfg.engine = e;
        }
        if let Some(y) = self.years {
            cfg.years = y;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(m) = self.max_plants {
            cfg.max_plants = m;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_run(args: &ScenarioArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let summary = run_experiment(&cfg)?;
    println!("output: {}", summary.out.display());
    for r in &summary.runs {
        println!(
            "{:>6}: {} files, {:.3} s stepping, final density {}, final basal area {:.4} m², conservation {}",
            r.engine.name(),
            r.files_written,
            r.timing.step_seconds(),
            r.final_total(Variable::Density),
            r.final_total(Variable::BasalArea),
            if r.conservation.holds() { "ok" } else { "VIOLATED" }
        );
    }
    if summary.runs.iter().any(|r| !r.conservation.holds()) {
        return Err(Error::Config("population bookkeeping failed; see output".into()));
    }
    Ok(())
}

fn is_run_dir(p: &Path) -> bool {
    p.join("fine").is_dir() && p.join("coarse").is_dir()
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (a, b, default_out) = match &args.b {
        Some(b) => (args.a.clone(), b.clone(), None),
        None if is_run_dir(&args.a) => (args.a.join("fine"), args.a.join("coarse"), Some(args.a.join("comparison"))),
        None => {
            return Err(Error::Config(format!(
                "{} does not contain fine/ and coarse/; give two directories",
                args.a.display()
            )))
        }
    };
    let report = compare_runs(&a, &b)?;
    print!("{}", report.summary_text());
    if let Some(out) = args.out.clone().or(default_out) {
        report.write(&out)?;
        println!("report: {}", out.join("report.json").display());
    }
    Ok(())
}

fn cmd_consistency(args: &ConsistencyArgs) -> Result<()> {
    let cfg = args.scenario.resolve()?;
    let phases = parse_phases(&args.phase)?;
    let params = cfg.load_params()?;
    let landscape = cfg.landscape()?;
    let source = cfg.fire_source(&params)?;
    let pool = thread_pool(cfg.threads)?;
    let mut fine = Simulation::<FineEngine>::initialize(params.clone(), landscape, cfg.max_plants, cfg.initial_avg, cfg.seed);
    for f in presample_fires(&source, &fine.landscape, args.warmup, cfg.seed)? {
        fine.step(&f, &pool)?;
    }
    let idx = match args.cell {
        Some(i) => i,
        None => fine
            .cells
            .first()
            .map(|(i, _)| *i)
            .ok_or_else(|| Error::Config("landscape has no active cells".into()))?,
    };
    let cell = fine
        .cell(idx)
        .ok_or_else(|| Error::Config(format!("cell {idx} is null or out of range")))?;
    let site = Site {
        terrain: cell.terrain,
        cell_area: cfg.cell_area,
        max_plants: cfg.max_plants,
    };
    let mut records = Vec::new();
    for phase in phases {
        let r = one_step_consistency(cell, phase, &params, &site, args.samples, cfg.seed);
        println!("phase {} ({} samples): max relative discrepancy {:.6}", r.phase, r.samples, r.max_relative());
        for f in &r.fields {
            println!(
                "  {:<10} {:<9} fine {:>12.6} coarse {:>12.6} diff {:>12.6} ± {:.6}",
                f.species,
                f.field,
                f.fine,
                f.coarse,
                f.difference,
                f.stderr()
            );
        }
        records.push(r);
    }
    if let Some(out) = &args.scenario.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let path = out.join("consistency.json");
        fs::write(&path, serde_json::to_string_pretty(&records)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.scenario.resolve()?;
    let report = benchmark(
        &cfg,
        &BenchOptions {
            reps: args.reps,
            warmup_years: args.warmup,
            threads: args.thread_sweep.clone(),
        },
    )?;
    print!("{}", report.summary_text());
    if let Some(out) = &args.scenario.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let path = out.join("bench.csv");
        fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
        let path = out.join("bench.json");
        fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cmd_cardinality(args: &ScenarioArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let params = cfg.load_params()?;
    let landscape = cfg.landscape()?;
    let source = cfg.fire_source(&params)?;
    let pool = thread_pool(cfg.threads)?;
    let mut fine = Simulation::<FineEngine>::initialize(params, landscape, cfg.max_plants, cfg.initial_avg, cfg.seed);
    let mut coarse = Simulation::<CoarseEngine>::from_fine(&fine);
    for f in presample_fires(&source, &fine.landscape, cfg.years, cfg.seed)? {
        fine.step(&f, &pool)?;
        coarse.step(&f, &pool)?;
    }
    let c = state_cardinality(&fine, &coarse);
    println!("{}", serde_json::to_string_pretty(&c)?);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Consistency(a) => cmd_consistency(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cardinality(a) => cmd_cardinality(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
