//! Space-filling designs in the unit hypercube `[0,1)^M`.

mod sobol;
mod sobol_table;

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{max_abs_correlation, min_distance_sq};

pub use sobol::{sobol_points, Sobol, SOBOL_MAX_DIM};

/// Largest double below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Sampler that produced a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    MonteCarlo,
    Sobol,
    Lhs,
    MaximinLhs,
    MinCorrLhs,
    NestedLhs,
    /// Points supplied from outside (e.g. read from a file or selected from a pool).
    External,
}

/// Selection criterion of [`optimized_lhs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsCriterion {
    Maximin,
    MinCorr,
}

/// Points in the unit hypercube, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDesign {
    points: DMatrix<f64>,
    generator: Generator,
    /// RNG seed, or the start offset for Sobol' designs.
    seed: u64,
    /// For Latin hypercubes: `strata[k][i]` is the zero-based stratum of row `i` in column `k`.
    strata: Option<Vec<Vec<usize>>>,
}

impl UnitDesign {
    pub fn new(points: DMatrix<f64>, generator: Generator, seed: u64) -> Result<Self> {
        let (n, m) = points.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!("design must be non-empty, got {n}x{m}")));
        }
        for k in 0..m {
            for i in 0..n {
                let v = points[(i, k)];
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::Domain {
                        coordinate: k,
                        value: v,
                        reason: "unit designs live in [0,1)".into(),
                    });
                }
            }
        }
        Ok(Self {
            points,
            generator,
            seed,
            strata: None,
        })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn into_points(self) -> DMatrix<f64> {
        self.points
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn strata(&self) -> Option<&[Vec<usize>]> {
        self.strata.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Writes the design as CSV with header `x1..xM`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_points_csv(&self.points, out)
    }

    /// Reads a design written by [`Self::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        Self::new(read_points_csv(input)?, Generator::External, 0)
    }
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("design CSV: {e}"))
}

/// Writes a point matrix as CSV with header `x1..xM`.
pub fn write_points_csv<W: Write>(points: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=points.ncols()).map(|k| format!("x{k}")).collect();
    w.write_record(&header).map_err(io_error)?;
    for row in points.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v}"))).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

/// Reads a headed numeric CSV into a point matrix.
pub fn read_points_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let m = r.headers().map_err(io_error)?.len();
    let mut values = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.map_err(io_error)?;
        if rec.len() != m {
            return Err(Error::Dimension {
                expected: m,
                actual: rec.len(),
            });
        }
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(io_error)?);
        }
        n += 1;
    }
    Ok(DMatrix::from_row_slice(n, m, &values))
}

fn check_shape(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "design size must be positive, got {n}x{m}"
        )));
    }
    Ok(())
}

/// Independent uniform sampling.
pub fn monte_carlo(n: usize, m: usize, seed: u64) -> Result<UnitDesign> {
    check_shape(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(n, m);
    for i in 0..n {
        for k in 0..m {
            points[(i, k)] = rng.random::<f64>();
        }
    }
    UnitDesign::new(points, Generator::MonteCarlo, seed)
}

/// Sobol' points `offset + 1 ..= offset + n`.
pub fn sobol_sequence(n: usize, m: usize, offset: u64) -> Result<UnitDesign> {
    check_shape(n, m)?;
    UnitDesign::new(sobol_points(n, m, offset)?, Generator::Sobol, offset)
}

fn lhs_with_rng(n: usize, m: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<Vec<usize>>) {
    let mut points = DMatrix::zeros(n, m);
    let mut strata = Vec::with_capacity(m);
    let nf = n as f64;
    for k in 0..m {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, &s) in perm.iter().enumerate() {
            let u: f64 = rng.sample(Open01);
            points[(i, k)] = ((s as f64 + u) / nf).min(BELOW_ONE);
        }
        strata.push(perm);
    }
    (points, strata)
}

/// Latin hypercube: one point per stratum `[s/N, (s+1)/N)` in every column.
pub fn lhs(n: usize, m: usize, seed: u64) -> Result<UnitDesign> {
    check_shape(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, strata) = lhs_with_rng(n, m, &mut rng);
    let mut d = UnitDesign::new(points, Generator::Lhs, seed)?;
    d.strata = Some(strata);
    Ok(d)
}

/// `count` independent Latin hypercubes drawn from one seeded stream; the
/// first one equals [`lhs`] for the same seed.
pub fn lhs_candidates(n: usize, m: usize, seed: u64, count: usize) -> Result<Vec<UnitDesign>> {
    check_shape(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (points, strata) = lhs_with_rng(n, m, &mut rng);
            let mut d = UnitDesign::new(points, Generator::Lhs, seed)?;
            d.strata = Some(strata);
            Ok(d)
        })
        .collect()
}

/// Best of `n_candidates` Latin hypercubes under the given criterion
/// (first candidate wins ties).
pub fn optimized_lhs(
    n: usize,
    m: usize,
    seed: u64,
    criterion: LhsCriterion,
    n_candidates: usize,
) -> Result<UnitDesign> {
    if n_candidates == 0 {
        return Err(Error::InvalidArgument(
            "optimized LHS needs at least one candidate".into(),
        ));
    }
    let mut best: Option<(f64, UnitDesign)> = None;
    for d in lhs_candidates(n, m, seed, n_candidates)? {
        // larger is better
        let score = match criterion {
            LhsCriterion::Maximin if n >= 2 => min_distance_sq(d.points()),
            LhsCriterion::Maximin => 0.0,
            LhsCriterion::MinCorr => -max_abs_correlation(d.points()),
        };
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, d));
        }
    }
    let (_, mut d) = best.expect("at least one candidate");
    d.generator = match criterion {
        LhsCriterion::Maximin => Generator::MaximinLhs,
        LhsCriterion::MinCorr => Generator::MinCorrLhs,
    };
    Ok(d)
}

/// Enriches a design with `n_en` points, sampled per column in empty strata
/// of the refined partition with `N + n_en` strata.
///
/// When a column has fewer than `n_en` empty strata, the remaining points go
/// to the least occupied ones. Columns are paired by independent shuffles.
pub fn nested_lhs_enrich(existing: &UnitDesign, n_en: usize, seed: u64) -> Result<UnitDesign> {
    if n_en == 0 {
        return Err(Error::InvalidArgument("enrichment size must be at least 1".into()));
    }
    let (n, m) = (existing.len(), existing.dim());
    let total = n + n_en;
    let tf = total as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(total, m);
    points.rows_mut(0, n).copy_from(existing.points());
    let mut strata = vec![vec![0usize; total]; m];
    for k in 0..m {
        let mut count = vec![0usize; total];
        for i in 0..n {
            let s = ((existing.points()[(i, k)] * tf) as usize).min(total - 1);
            count[s] += 1;
            strata[k][i] = s;
        }
        let mut empty: Vec<usize> = (0..total).filter(|&s| count[s] == 0).collect();
        empty.shuffle(&mut rng);
        let mut chosen: Vec<usize> = empty.into_iter().take(n_en).collect();
        for &s in &chosen {
            count[s] += 1;
        }
        if chosen.len() < n_en {
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut rng);
            while chosen.len() < n_en {
                let s = *order.iter().min_by_key(|&&s| count[s]).expect("non-empty partition");
                count[s] += 1;
                chosen.push(s);
            }
        }
        chosen.shuffle(&mut rng);
        for (r, &s) in chosen.iter().enumerate() {
            let u: f64 = rng.sample(Open01);
            points[(n + r, k)] = ((s as f64 + u) / tf).min(BELOW_ONE);
            strata[k][n + r] = s;
        }
    }
    let mut d = UnitDesign::new(points, Generator::NestedLhs, seed)?;
    d.strata = Some(strata);
    Ok(d)
}
