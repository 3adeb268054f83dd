use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{StudyConfig, StudyStrategy};
use crate::study::{run_study, write_outputs, StudyOutcome};
use crate::summary::{box_stats, BoxStats};

pub const SWEEP_HEADER: &str = "n_init,n_add,N,count,median,q25,q75,min,max,failures";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_init: usize,
    pub n_add: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: GridCell,
    pub n: usize,
    /// `None` when no replication of the cell produced an error estimate.
    pub stats: Option<BoxStats>,
    pub failures: usize,
}

/// Reads a grid given either as `[{"n_init": .., "n_add": ..}]` or as `[[n_init, n_add]]`.
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<GridCell>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Cell(GridCell),
        Pair(usize, usize),
    }
    let entries: Vec<Entry> = serde_json::from_str(text)?;
    anyhow::ensure!(!entries.is_empty(), "empty grid");
    Ok(entries
        .into_iter()
        .map(|e| match e {
            Entry::Cell(c) => c,
            Entry::Pair(n_init, n_add) => GridCell { n_init, n_add },
        })
        .collect())
}

fn cell_config(base: &StudyConfig, cell: GridCell) -> StudyConfig {
    let mut cfg = base.clone();
    cfg.strategies = vec![StudyStrategy::SeqSOpt];
    cfg.schedule.init = cell.n_init;
    cfg.schedule.add = cell.n_add;
    cfg.output_dir = base.output_dir.join(format!("init{}_add{}", cell.n_init, cell.n_add));
    cfg
}

/// Runs the S-optimal strategy for every `(n_init, n_add)` cell and reports
/// the error distribution at the final size. Cells share the validation set
/// and, where initial sizes coincide, the initial designs.
pub fn sweep_init_add(
    base: &StudyConfig,
    grid: &[GridCell],
    workers: usize,
    write: bool,
) -> anyhow::Result<(Vec<SweepRow>, Vec<StudyOutcome>)> {
    let configs: Vec<StudyConfig> = grid.iter().map(|&c| cell_config(base, c)).collect();
    for (cfg, cell) in configs.iter().zip(grid) {
        cfg.validate()
            .map_err(|e| anyhow::anyhow!("cell ({}, {}): {e}", cell.n_init, cell.n_add))?;
    }
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for (mut cfg, &cell) in configs.into_iter().zip(grid) {
        cfg.validation_seed = Some(base.validation_seed());
        let out_dir = std::mem::replace(&mut cfg.output_dir, base.output_dir.clone());
        let mut outcome = run_study(&cfg, workers)?;
        outcome.config.output_dir = out_dir.clone();
        if write {
            write_outputs(&outcome, &out_dir)?;
        }
        let n = cfg.schedule.max;
        let finals: Vec<f64> = outcome
            .records
            .iter()
            .filter_map(|r| r.steps.last().filter(|s| s.n == n).and_then(|s| s.rmse))
            .collect();
        rows.push(SweepRow {
            cell,
            n,
            stats: box_stats(&finals),
            failures: outcome.failures.len(),
        });
        outcomes.push(outcome);
    }
    Ok((rows, outcomes))
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], mut out: W) -> anyhow::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        let stats = match &r.stats {
            Some(s) => format!("{},{},{},{},{},{}", s.count, s.median, s.q25, s.q75, s.min, s.max),
            None => "0,,,,,".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            r.cell.n_init, r.cell.n_add, r.n, stats, r.failures
        )?;
    }
    Ok(())
}

pub fn write_sweep_file(rows: &[SweepRow], dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_sweep(rows, &mut buf)?;
    fs::write(dir.join("sweep.csv"), buf)?;
    Ok(())
}
