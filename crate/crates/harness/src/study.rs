use std::cell::Cell;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spce::benchmarks::{benchmark, BenchmarkModel};
use spce::design::{
    adaptive_sequential_run, basis_columns, evaluate_design, ExperimentalDesign, Oracle, RunRecord, SequentialConfig,
};
use spce::metrics::{score_design, DesignScore};
use spce::pce::{degree_adaptive_fit, ModelMatrix, SparsePce};
use spce::sampling::{optimized_lhs, sobol_sequence, LhsCriterion};

use crate::config::{design_seed, StudyConfig, StudyStrategy};
use crate::summary::{summarize, BoxStats};
use crate::validation::{validation_set, ValidationSet};

pub const RESULTS_HEADER: &str =
    "benchmark,strategy,replication,N,rmse,loo,maximin,discrepancy_sq,cond_number,s_value,wall_seconds";
pub const SUMMARY_HEADER: &str = "benchmark,strategy,N,count,median,q25,q75,min,max";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub n: usize,
    pub rmse: Option<f64>,
    pub loo: f64,
    pub maximin: f64,
    pub discrepancy_sq: f64,
    pub cond_number: Option<f64>,
    pub s_value: Option<f64>,
    pub wall_seconds: f64,
}

impl StepRow {
    fn new(n: usize, rmse: Option<f64>, loo: f64, score: &DesignScore, wall_seconds: f64) -> Self {
        Self {
            n,
            rmse,
            loo,
            maximin: score.maximin,
            discrepancy_sq: score.discrepancy_sq,
            cond_number: score.cond_number,
            s_value: score.s_value,
            wall_seconds,
        }
    }
}

/// Trajectory of one strategy in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub benchmark: String,
    pub strategy: StudyStrategy,
    pub replication: usize,
    pub steps: Vec<StepRow>,
    /// Time spent inside the model, apart from fitting and selection.
    pub oracle_seconds: f64,
    /// Unit-cube points of the design at the largest size.
    pub final_design: Vec<Vec<f64>>,
    /// Loop detail of sequential strategies.
    pub sequential: Option<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub strategy: StudyStrategy,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub strategy: StudyStrategy,
    pub n: usize,
    pub stats: BoxStats,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub config: StudyConfig,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<Failure>,
    pub summary: Vec<SummaryRow>,
}

impl StudyOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn record(&self, strategy: StudyStrategy, replication: usize) -> Option<&ReplicationRecord> {
        self.records
            .iter()
            .find(|r| r.strategy == strategy && r.replication == replication)
    }

    pub fn summary_at(&self, strategy: StudyStrategy, n: usize) -> Option<&BoxStats> {
        self.summary
            .iter()
            .find(|r| r.strategy == strategy && r.n == n)
            .map(|r| &r.stats)
    }
}

struct TimedOracle<'a> {
    model: &'a BenchmarkModel,
    timing: bool,
    spent: Cell<f64>,
}

impl Oracle for TimedOracle<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<f64, String> {
        if !self.timing {
            return self.model.eval(x).map_err(|e| e.to_string());
        }
        let t = Instant::now();
        let y = self.model.eval(x).map_err(|e| e.to_string());
        self.spent.set(self.spent.get() + t.elapsed().as_secs_f64());
        y
    }
}

struct Clock {
    on: bool,
    last: Instant,
}

impl Clock {
    fn new(on: bool) -> Self {
        Self {
            on,
            last: Instant::now(),
        }
    }

    fn lap(&mut self) -> f64 {
        if !self.on {
            return 0.0;
        }
        let now = Instant::now();
        let dt = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        dt
    }
}

fn score(model: &SparsePce, design: &ExperimentalDesign) -> anyhow::Result<DesignScore> {
    let basis = model.indices();
    let a = basis_columns(&design.standard, None, &model.input.poly_families(), &basis)?.transpose();
    Ok(score_design(&design.unit, Some(&ModelMatrix::new(a)))?)
}

fn rows_of(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    points.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn one_shot_design(
    config: &StudyConfig,
    strategy: StudyStrategy,
    replication: usize,
    n: usize,
    m: usize,
) -> anyhow::Result<DMatrix<f64>> {
    let seed = design_seed(config.seed, replication, n, strategy);
    let design = match strategy {
        StudyStrategy::MaximinLhs => optimized_lhs(n, m, seed, LhsCriterion::Maximin, config.lhs_candidates)?,
        StudyStrategy::MincorrLhs => optimized_lhs(n, m, seed, LhsCriterion::MinCorr, config.lhs_candidates)?,
        StudyStrategy::Sobol => {
            let span = config.static_sizes().into_iter().max().unwrap_or(n) as u64;
            sobol_sequence(n, m, replication as u64 * span)?
        }
        other => anyhow::bail!("{other} is sequential"),
    };
    Ok(design.into_points())
}

fn run_one_shot(
    config: &StudyConfig,
    model: &BenchmarkModel,
    validation: &ValidationSet,
    strategy: StudyStrategy,
    replication: usize,
) -> anyhow::Result<ReplicationRecord> {
    let oracle = TimedOracle {
        model,
        timing: config.record_timing,
        spent: Cell::new(0.0),
    };
    let mut sizes = config.static_sizes();
    sizes.sort_unstable();
    sizes.dedup();
    let mut steps = Vec::with_capacity(sizes.len());
    let mut final_design = Vec::new();
    for n in sizes {
        let mut clock = Clock::new(config.record_timing);
        let unit = one_shot_design(config, strategy, replication, n, model.dim())?;
        let design = evaluate_design(&oracle, &model.input, unit)?;
        let fit = degree_adaptive_fit(&model.input, &config.pce, &design.standard, &design.responses)
            .with_context(|| format!("fit at N = {n}"))?;
        let rmse = validation.rmse(&fit)?;
        let s = score(&fit, &design)?;
        steps.push(StepRow::new(n, Some(rmse), fit.loo_error, &s, clock.lap()));
        final_design = rows_of(&design.unit);
    }
    Ok(ReplicationRecord {
        benchmark: config.benchmark.clone(),
        strategy,
        replication,
        steps,
        oracle_seconds: oracle.spent.get(),
        final_design,
        sequential: None,
    })
}

fn run_sequential(
    config: &StudyConfig,
    model: &BenchmarkModel,
    validation: &ValidationSet,
    strategy: StudyStrategy,
    replication: usize,
) -> anyhow::Result<ReplicationRecord> {
    let kind = strategy.sequential().expect("sequential strategy");
    let s = config.schedule;
    // independent of the schedule, so sweep cells share initial designs
    let seed = design_seed(config.seed, replication, 0, strategy);
    let mut seq = SequentialConfig::new(kind, config.pce, s.init, s.add, s.max, seed);
    seq.lhs_candidates = config.lhs_candidates;
    seq.pool_size = config.pool_size;
    seq.pool_offset = (replication * config.pool_size) as u64;
    seq.sparse_d_basis = config.sparse_d_basis;
    let oracle = TimedOracle {
        model,
        timing: config.record_timing,
        spent: Cell::new(0.0),
    };
    let mut clock = Clock::new(config.record_timing);
    let mut laps = Vec::new();
    let mut rmse_error = None;
    let mut observer = |fit: &SparsePce, _: &ExperimentalDesign| {
        laps.push(clock.lap());
        match validation.rmse(fit) {
            Ok(r) => Some(r),
            Err(e) => {
                rmse_error.get_or_insert(e);
                None
            }
        }
    };
    let outcome = adaptive_sequential_run(&oracle, &model.input, &seq, &mut observer)?;
    if let Some(e) = rmse_error {
        return Err(e.context("validation error"));
    }
    let steps = outcome
        .record
        .steps
        .iter()
        .zip(&laps)
        .map(|(st, &dt)| StepRow::new(st.n, st.rmse, st.loo, &st.score, dt))
        .collect();
    Ok(ReplicationRecord {
        benchmark: config.benchmark.clone(),
        strategy,
        replication,
        steps,
        oracle_seconds: oracle.spent.get(),
        final_design: rows_of(&outcome.design.unit),
        sequential: Some(outcome.record),
    })
}

/// Worker count: explicit value, then `SPCE_WORKERS`, then all cores.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("SPCE_WORKERS").ok().and_then(|v| v.parse().ok()))
        .filter(|&k| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (strategy, replication) pair on a pool of `workers` threads.
pub fn run_study(config: &StudyConfig, workers: usize) -> anyhow::Result<StudyOutcome> {
    config.validate()?;
    let model = benchmark(&config.benchmark)?;
    let cache = config.cache_validation.then(|| config.output_dir.join("validation"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let validation =
        pool.install(|| validation_set(&model, config.n_val, config.validation_seed(), cache.as_deref()))?;
    log::info!(
        "{}: validation set of {} points, variance {:.6e}",
        config.benchmark,
        validation.len(),
        validation.variance()
    );
    let mut strategies = config.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let jobs: Vec<(StudyStrategy, usize)> = strategies
        .iter()
        .flat_map(|&s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let results: Vec<(StudyStrategy, usize, anyhow::Result<ReplicationRecord>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(strategy, rep)| {
                let out = if strategy.sequential().is_some() {
                    run_sequential(config, &model, &validation, strategy, rep)
                } else {
                    run_one_shot(config, &model, &validation, strategy, rep)
                };
                match &out {
                    Ok(_) => log::info!("{strategy} replication {rep} done"),
                    Err(e) => log::error!("{strategy} replication {rep} failed: {e:#}"),
                }
                (strategy, rep, out)
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (strategy, replication, out) in results {
        match out {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure {
                strategy,
                replication,
                message: format!("{e:#}"),
            }),
        }
    }
    records.sort_by_key(|r| (r.strategy, r.replication));
    let summary = summarize(
        records
            .iter()
            .flat_map(|r| r.steps.iter().map(move |s| ((r.strategy, s.n), s.rmse))),
    )
    .into_iter()
    .map(|((strategy, n), stats)| SummaryRow {
        benchmark: config.benchmark.clone(),
        strategy,
        n,
        stats,
    })
    .collect();
    Ok(StudyOutcome {
        config: config.clone(),
        records,
        failures,
        summary,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_results<W: Write>(records: &[ReplicationRecord], mut out: W) -> anyhow::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    let mut rows: Vec<(&ReplicationRecord, &StepRow)> = records
        .iter()
        .flat_map(|r| r.steps.iter().map(move |s| (r, s)))
        .collect();
    rows.sort_by_key(|(r, s)| (r.strategy, r.replication, s.n));
    for (r, s) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.benchmark,
            r.strategy,
            r.replication,
            s.n,
            opt(s.rmse),
            s.loo,
            s.maximin,
            s.discrepancy_sq,
            opt(s.cond_number),
            opt(s.s_value),
            s.wall_seconds
        )?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], mut out: W) -> anyhow::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for row in summary {
        let s = &row.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.benchmark, row.strategy, row.n, s.count, s.median, s.q25, s.q75, s.min, s.max
        )?;
    }
    Ok(())
}

/// Writes `results.csv`, `summary.csv`, `failures.json` and one JSON file per replication.
pub fn write_outputs(outcome: &StudyOutcome, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("runs"))?;
    let mut buf = Vec::new();
    write_results(&outcome.records, &mut buf)?;
    fs::write(dir.join("results.csv"), buf)?;
    let mut buf = Vec::new();
    write_summary(&outcome.summary, &mut buf)?;
    fs::write(dir.join("summary.csv"), buf)?;
    for r in &outcome.records {
        let path = dir
            .join("runs")
            .join(format!("{}_rep{:03}.json", r.strategy, r.replication));
        fs::write(path, serde_json::to_vec_pretty(r)?)?;
    }
    fs::write(dir.join("failures.json"), serde_json::to_vec_pretty(&outcome.failures)?)?;
    fs::write(dir.join("config.json"), serde_json::to_vec_pretty(&outcome.config)?)?;
    Ok(())
}
