//! Wall-clock benchmarks of both engines over identical inputs.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::ThreadPool;
use serde::Serialize;

use crate::disturbance::FireMap;
use crate::engine::{thread_pool, CellEngine, CoarseEngine, EngineKind, FineEngine, Simulation};
use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::run::presample_fires;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOptions {
    pub reps: usize,
    /// Untimed years run first, e.g. to reach saturation.
    pub warmup_years: u32,
    /// Thread counts to time; empty means the configured count.
    pub threads: Vec<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            reps: 3,
            warmup_years: 0,
            threads: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub engine: EngineKind,
    pub threads: usize,
    pub seconds: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub cells: usize,
    pub max_plants: u32,
    pub timed_years: u32,
    pub warmup_years: u32,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn median(&self, engine: EngineKind, threads: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.engine == engine && r.threads == threads)
            .map(|r| r.median)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("engine,threads,median_seconds,reps\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.engine, r.threads, r.median, r.seconds.len());
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "{} cells, m = {}, {} timed years after {} warm-up years\n",
            self.cells, self.max_plants, self.timed_years, self.warmup_years
        );
        for r in &self.rows {
            let _ = writeln!(s, "{:>6} threads={:<3} median {:.4} s", r.engine.name(), r.threads, r.median);
        }
        let mut threads: Vec<usize> = self.rows.iter().map(|r| r.threads).collect();
        threads.dedup();
        for t in threads {
            if let (Some(f), Some(c)) = (self.median(EngineKind::Fine, t), self.median(EngineKind::Coarse, t)) {
                let _ = writeln!(s, "coarse/fine at {t} threads: {:.4}", c / f);
            }
        }
        s
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Steps a copy of `sim` through `fires` and returns the elapsed seconds.
pub fn time_years<E: CellEngine>(sim: &Simulation<E>, fires: &[FireMap], pool: &ThreadPool) -> Result<f64> {
    let mut s = sim.clone();
    let t = Instant::now();
    for f in fires {
        s.step(f, pool)?;
    }
    Ok(t.elapsed().as_secs_f64())
}

/// Warmed-up states of both engines, ready for timing.
#[derive(Debug, Clone)]
pub struct WarmStates {
    pub fine: Simulation<FineEngine>,
    pub coarse: Simulation<CoarseEngine>,
    /// Fires of the timed years.
    pub fires: Vec<FireMap>,
}

pub fn warm_states(cfg: &RunConfig, warmup_years: u32, pool: &ThreadPool) -> Result<WarmStates> {
    cfg.validate()?;
    let params = cfg.load_params()?;
    let landscape = cfg.landscape()?;
    let source = cfg.fire_source(&params)?;
    let fires = presample_fires(&source, &landscape, warmup_years + cfg.years, cfg.seed)?;
    let mut fine = Simulation::<FineEngine>::initialize(params, landscape, cfg.max_plants, cfg.initial_avg, cfg.seed);
    let mut coarse = Simulation::<CoarseEngine>::from_fine(&fine);
    let (warm, timed) = fires.split_at(warmup_years as usize);
    for f in warm {
        fine.step(f, pool)?;
        coarse.step(f, pool)?;
    }
    Ok(WarmStates {
        fine,
        coarse,
        fires: timed.to_vec(),
    })
}

/// Times both engines `reps` times for each thread count, alternating
/// engines between repetitions.
pub fn benchmark(cfg: &RunConfig, opts: &BenchOptions) -> Result<BenchReport> {
    let threads = if opts.threads.is_empty() {
        vec![cfg.threads]
    } else {
        opts.threads.clone()
    };
    let warm = warm_states(cfg, opts.warmup_years, &thread_pool(cfg.threads)?)?;
    let mut rows = Vec::new();
    for &t in &threads {
        let pool = thread_pool(t)?;
        let mut fine = Vec::with_capacity(opts.reps);
        let mut coarse = Vec::with_capacity(opts.reps);
        for _ in 0..opts.reps.max(1) {
            fine.push(time_years(&warm.fine, &warm.fires, &pool)?);
            coarse.push(time_years(&warm.coarse, &warm.fires, &pool)?);
        }
        for (engine, seconds) in [(EngineKind::Fine, fine), (EngineKind::Coarse, coarse)] {
            rows.push(BenchRow {
                engine,
                threads: t,
                median: median(&seconds),
                seconds,
            });
        }
    }
    Ok(BenchReport {
        cells: warm.fine.cells.len(),
        max_plants: cfg.max_plants,
        timed_years: cfg.years,
        warmup_years: opts.warmup_years,
        rows,
    })
}
