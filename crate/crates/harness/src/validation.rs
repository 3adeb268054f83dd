use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::DMatrix;
use rayon::prelude::*;
use spce::benchmarks::BenchmarkModel;
use spce::input::{isoprobabilistic_transform, sample_joint, Direction};
use spce::pce::{prediction_errors, SparsePce};

/// Rows predicted per batch; bounds the size of the polynomial tables.
const CHUNK: usize = 10_000;

/// Monte Carlo validation sample of a benchmark.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub physical: DMatrix<f64>,
    pub standard: DMatrix<f64>,
    pub responses: Vec<f64>,
}

impl ValidationSet {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.responses.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample variance with the 1/N normalization.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.responses.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Relative mean square error of a surrogate on this set.
    pub fn rmse(&self, model: &SparsePce) -> anyhow::Result<f64> {
        let n = self.len();
        let mut predicted = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            let rows = CHUNK.min(n - start);
            let block = self.standard.rows(start, rows).into_owned();
            predicted.extend(model.predict_standard(&block)?);
            start += rows;
        }
        Ok(prediction_errors(&predicted, &self.responses)?.1)
    }
}

pub fn cache_path(dir: &Path, benchmark: &str, n_val: usize, seed: u64) -> PathBuf {
    dir.join(format!("{benchmark}_n{n_val}_s{seed}.csv"))
}

fn evaluate(model: &BenchmarkModel, n_val: usize, seed: u64) -> anyhow::Result<(DMatrix<f64>, Vec<f64>)> {
    let physical = sample_joint(&model.input, n_val, seed)?;
    let m = physical.ncols();
    let responses = (0..n_val)
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = (0..m).map(|k| physical[(i, k)]).collect();
            model.eval(&x).map_err(|e| anyhow!("{} at {x:?}: {e}", model.name))
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    Ok((physical, responses))
}

fn write_cache(path: &Path, physical: &DMatrix<f64>, y: &[f64]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        let mut header: Vec<String> = (1..=physical.ncols()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (i, yi) in y.iter().enumerate() {
            let mut rec: Vec<String> = physical.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{yi}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_cache(path: &Path, m: usize, n_val: usize) -> anyhow::Result<(DMatrix<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    anyhow::ensure!(
        r.headers()?.len() == m + 1,
        "cache {} has the wrong width",
        path.display()
    );
    let mut values = Vec::with_capacity(n_val * m);
    let mut y = Vec::with_capacity(n_val);
    for rec in r.records() {
        let rec = rec?;
        anyhow::ensure!(rec.len() == m + 1, "ragged row in {}", path.display());
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.parse()?;
            if k < m {
                values.push(v);
            } else {
                y.push(v);
            }
        }
    }
    anyhow::ensure!(
        y.len() == n_val,
        "cache {} holds {} rows, expected {n_val}",
        path.display(),
        y.len()
    );
    Ok((DMatrix::from_row_slice(n_val, m, &values), y))
}

/// Draws the validation sample, reusing the CSV under `cache_dir` when present.
pub fn validation_set(
    model: &BenchmarkModel,
    n_val: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> anyhow::Result<ValidationSet> {
    let m = model.dim();
    let (physical, responses) = match cache_dir.map(|d| cache_path(d, &model.name, n_val, seed)) {
        Some(path) if path.exists() => {
            log::info!("validation set from {}", path.display());
            read_cache(&path, m, n_val).with_context(|| format!("reading {}", path.display()))?
        }
        Some(path) => {
            let (p, y) = evaluate(model, n_val, seed)?;
            write_cache(&path, &p, &y).with_context(|| format!("writing {}", path.display()))?;
            (p, y)
        }
        None => evaluate(model, n_val, seed)?,
    };
    let standard = isoprobabilistic_transform(&model.input, &physical, Direction::ToStandard)?;
    Ok(ValidationSet {
        physical,
        standard,
        responses,
    })
}
