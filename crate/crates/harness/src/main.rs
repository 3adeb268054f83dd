use std::fs::File;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use spce::benchmarks::benchmark;
use spce::design::evaluate_design;
use spce::input::{isoprobabilistic_transform, Direction};
use spce::pce::{degree_adaptive_fit, PceConfig};
use spce::sampling::{lhs, monte_carlo, optimized_lhs, read_points_csv, sobol_sequence, LhsCriterion};
use spce_harness::{
    parse_grid, resolve_workers, run_study, sweep_init_add, validation_set, write_outputs, write_sweep_file,
    StudyConfig,
};

#[derive(Parser)]
#[command(name = "spce", version, about = "Sparse PCE experimental design studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write results.csv, summary.csv and per-run JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "SPCE_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final-size error of the S-optimal strategy over a grid of (N_init, N_add).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, env = "SPCE_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a unit-hypercube design as CSV.
    Sample {
        #[arg(long, value_enum)]
        strategy: Sampler,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// RNG seed, or the start offset for Sobol' points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        candidates: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a sparse PCE of a benchmark on a design read from CSV.
    Fit {
        #[arg(long)]
        benchmark: String,
        #[arg(long)]
        design: PathBuf,
        /// Degree range `lo:hi`, or a single degree.
        #[arg(long, default_value = "3:20")]
        degree: String,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Coordinates of the design file.
        #[arg(long, value_enum, default_value_t = Space::Unit)]
        space: Space,
        /// Size of a Monte Carlo validation set; no validation when zero.
        #[arg(long, default_value_t = 0)]
        n_val: usize,
        #[arg(long, default_value_t = 1)]
        val_seed: u64,
        /// Writes the fitted model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Print the default study configuration of a benchmark.
    Preset {
        #[arg(long)]
        benchmark: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Sampler {
    Mc,
    Lhs,
    MaximinLhs,
    MincorrLhs,
    Sobol,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Space {
    Unit,
    Physical,
}

fn parse_degree(text: &str) -> anyhow::Result<(u32, u32)> {
    let parse = |s: &str| s.trim().parse::<u32>().with_context(|| format!("bad degree '{s}'"));
    match text.split_once(':') {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => {
            let p = parse(text)?;
            Ok((p, p))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, workers, out } => {
            let mut cfg = StudyConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let outcome = run_study(&cfg, resolve_workers(workers))?;
            write_outputs(&outcome, &cfg.output_dir)?;
            for f in &outcome.failures {
                eprintln!("failed: {} replication {}: {}", f.strategy, f.replication, f.message);
            }
            println!(
                "{} records, {} failures, written to {}",
                outcome.records.len(),
                outcome.failures.len(),
                cfg.output_dir.display()
            );
            Ok(outcome.success())
        }
        Command::Sweep {
            config,
            grid,
            workers,
            out,
        } => {
            let mut cfg = StudyConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let text = std::fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let cells = parse_grid(&text)?;
            let (rows, _) = sweep_init_add(&cfg, &cells, resolve_workers(workers), true)?;
            write_sweep_file(&rows, &cfg.output_dir)?;
            let failures: usize = rows.iter().map(|r| r.failures).sum();
            println!(
                "{} cells written to {}",
                rows.len(),
                cfg.output_dir.join("sweep.csv").display()
            );
            Ok(failures == 0)
        }
        Command::Sample {
            strategy,
            n,
            m,
            seed,
            candidates,
            out,
        } => {
            let design = match strategy {
                Sampler::Mc => monte_carlo(n, m, seed)?,
                Sampler::Lhs => lhs(n, m, seed)?,
                Sampler::MaximinLhs => optimized_lhs(n, m, seed, LhsCriterion::Maximin, candidates)?,
                Sampler::MincorrLhs => optimized_lhs(n, m, seed, LhsCriterion::MinCorr, candidates)?,
                Sampler::Sobol => sobol_sequence(n, m, seed)?,
            };
            match out {
                Some(path) => {
                    design.write_csv(File::create(&path).with_context(|| format!("creating {}", path.display()))?)?
                }
                None => design.write_csv(io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Fit {
            benchmark: name,
            design,
            degree,
            q,
            space,
            n_val,
            val_seed,
            model_out,
        } => {
            let model = benchmark(&name)?;
            let file = File::open(&design).with_context(|| format!("opening {}", design.display()))?;
            let points = read_points_csv(BufReader::new(file))?;
            if points.ncols() != model.dim() {
                bail!(
                    "{name} takes {} inputs, design has {} columns",
                    model.dim(),
                    points.ncols()
                );
            }
            let unit = match space {
                Space::Unit => points,
                Space::Physical => {
                    let standard = isoprobabilistic_transform(&model.input, &points, Direction::ToStandard)?;
                    model.input.standard_to_unit(&standard)?
                }
            };
            let ed = evaluate_design(&model, &model.input, unit)?;
            let (lo, hi) = parse_degree(&degree)?;
            let fit = degree_adaptive_fit(&model.input, &PceConfig::new(lo, hi, q), &ed.standard, &ed.responses)?;
            let rmse = if n_val > 0 {
                Some(validation_set(&model, n_val, val_seed, None)?.rmse(&fit)?)
            } else {
                None
            };
            let report = json!({
                "benchmark": name,
                "n": ed.len(),
                "degree": fit.degree(),
                "n_terms": fit.terms.len(),
                "loo": fit.loo_error,
                "mean": fit.mean(),
                "variance": fit.variance(),
                "rmse": rmse,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(path) = model_out {
                std::fs::write(&path, serde_json::to_vec_pretty(&fit)?)?;
            }
            Ok(true)
        }
        Command::Preset { benchmark } => {
            println!("{}", serde_json::to_string_pretty(&StudyConfig::preset(&benchmark)?)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
