//! Greedy and exchange selection of design points from a candidate pool.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pool::{basis_columns, CandidatePool};
use crate::error::{Error, Result};
use crate::metrics::s_value_matrix;
use crate::pce::MultiIndex;

/// Relative slack under which two scores count as tied (the lower row wins).
const TIE: f64 = 1e-12;
/// Relative residual below which a candidate adds no new direction.
const RANK_TOLERANCE: f64 = 1e-10;
/// Terms of the column-norm product folded before taking a logarithm.
const LOG_CHUNK: usize = 16;

/// Selected pool rows with the criterion reached by the augmented design.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub rows: Vec<usize>,
    /// S-value, `log det(A^T A)` or the maximin distance, by selector.
    pub criterion: f64,
}

/// Fedorov exchange settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedorovOptions {
    pub max_passes: usize,
    /// Minimal relative determinant gain of an accepted swap.
    pub tolerance: f64,
    /// Extra exchanges from random starts; the best determinant is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FedorovOptions {
    fn default() -> Self {
        Self {
            max_passes: 50,
            tolerance: 1e-9,
            restarts: 10,
            seed: 0,
        }
    }
}

/// First eligible index whose score is within the tie slack of the maximum.
fn argmax_first(scores: &[f64], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let best = (0..scores.len())
        .filter(|&c| eligible(c))
        .map(|c| scores[c])
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let floor = if best.is_finite() {
        best - TIE * (1.0 + best.abs())
    } else {
        best
    };
    (0..scores.len()).find(|&c| eligible(c) && scores[c] >= floor)
}

fn dot_col(m: &DMatrix<f64>, c: usize, v: &[f64]) -> f64 {
    m.column(c).iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Greedy maximin: each pick maximizes the smallest unit-cube distance to
/// the current design and the points already picked.
pub fn seq_maximin_select(pool: &CandidatePool, current_unit: &DMatrix<f64>, n_new: usize) -> Result<Selection> {
    if current_unit.nrows() > 0 && current_unit.ncols() != pool.dim() {
        return Err(Error::Dimension {
            expected: pool.dim(),
            actual: current_unit.ncols(),
        });
    }
    let rows = pool.require(n_new)?;
    let x = pool.unit();
    let m = pool.dim();
    let dist2 = |c: usize, p: &[f64]| -> f64 {
        let r = rows[c];
        (0..m).map(|k| (x[(r, k)] - p[k]).powi(2)).sum()
    };
    let mut min_d2 = vec![f64::INFINITY; rows.len()];
    for i in 0..current_unit.nrows() {
        let p: Vec<f64> = current_unit.row(i).iter().copied().collect();
        for (c, d) in min_d2.iter_mut().enumerate() {
            *d = d.min(dist2(c, &p));
        }
    }
    let mut taken = vec![false; rows.len()];
    let mut picked = Vec::with_capacity(n_new);
    let mut criterion = f64::INFINITY;
    for _ in 0..n_new {
        let c = argmax_first(&min_d2, |c| !taken[c]).expect("pool holds enough rows");
        criterion = criterion.min(min_d2[c]);
        taken[c] = true;
        picked.push(rows[c]);
        let p: Vec<f64> = x.row(rows[c]).iter().copied().collect();
        for (cc, d) in min_d2.iter_mut().enumerate() {
            *d = d.min(dist2(cc, &p));
        }
    }
    Ok(Selection {
        rows: picked,
        criterion: criterion.sqrt(),
    })
}

/// Orthonormal basis of the span of design rows (in coefficient space).
struct RowSpan {
    q: Vec<DVector<f64>>,
}

impl RowSpan {
    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.q {
                let s = q.dot(&r);
                r.axpy(-s, q, 1.0);
            }
        }
        r
    }

    /// Adds `v` if it leaves the span; returns the new direction.
    fn push(&mut self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let r = self.residual(v);
        let n = r.norm();
        if n > RANK_TOLERANCE * v.norm().max(f64::MIN_POSITIVE) {
            let q = r / n;
            self.q.push(q.clone());
            Some(q)
        } else {
            None
        }
    }
}

/// Shared state of the greedy selectors over the available pool rows.
struct Greedy<'a> {
    rows: Vec<usize>,
    /// `k x n_c` candidate evaluations.
    vt: DMatrix<f64>,
    taken: Vec<bool>,
    picked: Vec<usize>,
    /// `k x n` current design evaluations, picks appended.
    design: Vec<DVector<f64>>,
    k: usize,
    _pool: &'a CandidatePool,
}

impl<'a> Greedy<'a> {
    fn new(pool: &'a CandidatePool, basis: &[MultiIndex], current_std: &DMatrix<f64>, n_new: usize) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidArgument("selection basis is empty".into()));
        }
        if current_std.nrows() > 0 && current_std.ncols() != pool.dim() {
            return Err(Error::Dimension {
                expected: pool.dim(),
                actual: current_std.ncols(),
            });
        }
        let rows = pool.require(n_new)?;
        let vt = basis_columns(pool.standard(), Some(&rows), pool.families(), basis)?;
        let design = if current_std.nrows() > 0 {
            let cur = basis_columns(current_std, None, pool.families(), basis)?;
            cur.column_iter().map(|c| c.clone_owned()).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            taken: vec![false; rows.len()],
            rows,
            vt,
            picked: Vec::new(),
            design,
            k: basis.len(),
            _pool: pool,
        })
    }

    fn take(&mut self, c: usize) {
        self.taken[c] = true;
        self.picked.push(c);
        self.design.push(self.vt.column(c).clone_owned());
    }

    /// Singular start: grows the spanned row space until it has full rank or
    /// `n_new` picks are made. Each pick maximizes the orthogonal residual.
    fn singular_phase(&mut self, n_new: usize, column_norms: bool) -> Result<()> {
        let mut span = RowSpan { q: Vec::new() };
        for v in &self.design {
            span.push(v);
        }
        if span.q.len() >= self.k {
            return Ok(());
        }
        let nc = self.rows.len();
        let mut resid: Vec<f64> = (0..nc).map(|c| self.vt.column(c).norm_squared()).collect();
        let scale = resid.iter().cloned().fold(0.0, f64::max);
        for q in &span.q {
            let proj = self.vt.tr_mul(q);
            for (r, p) in resid.iter_mut().zip(proj.iter()) {
                *r -= p * p;
            }
        }
        while span.q.len() < self.k && self.picked.len() < n_new {
            let mut c = argmax_first(&resid, |c| !self.taken[c]).expect("pool holds enough rows");
            if resid[c] <= (RANK_TOLERANCE * RANK_TOLERANCE) * scale {
                return Err(Error::SingularDesign("candidate pool does not span the basis".into()));
            }
            if column_norms && span.q.len() + 1 == self.k {
                // the completing pick sets the determinant; rank by S instead
                let norms: Vec<f64> = (0..self.k)
                    .map(|j| self.design.iter().map(|v| v[j] * v[j]).sum())
                    .collect();
                let floor = (RANK_TOLERANCE * RANK_TOLERANCE) * scale;
                let score: Vec<f64> = (0..nc)
                    .map(|c| {
                        if resid[c] <= floor {
                            return f64::NEG_INFINITY;
                        }
                        let col = self.vt.column(c);
                        let log_norms: f64 = norms.iter().zip(col.iter()).map(|(n, v)| (n + v * v).ln()).sum();
                        resid[c].ln() - log_norms
                    })
                    .collect();
                c = argmax_first(&score, |c| !self.taken[c]).expect("pool holds enough rows");
            }
            let v = self.vt.column(c).clone_owned();
            self.take(c);
            if let Some(q) = span.push(&v) {
                let proj = self.vt.tr_mul(&q);
                for (r, p) in resid.iter_mut().zip(proj.iter()) {
                    *r -= p * p;
                }
            }
        }
        Ok(())
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.k, self.k);
        for v in &self.design {
            g.ger(1.0, v, v, 1.0);
        }
        g
    }

    fn inverse_gram(&self) -> Result<DMatrix<f64>> {
        self.gram()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::SingularDesign("information matrix is not positive definite".into()))
    }

    /// `d_c = v_c^T M v_c` for every candidate.
    fn variance_function(&self, minv: &DMatrix<f64>) -> Vec<f64> {
        let p = minv * &self.vt;
        (0..self.rows.len())
            .map(|c| p.column(c).dot(&self.vt.column(c)))
            .collect()
    }

    /// Rank-one update of `M` and `d` after adding the design row `x`.
    fn add_update(&self, minv: &mut DMatrix<f64>, d: &mut [f64], x: &DVector<f64>) {
        let z = &*minv * x;
        let denom = 1.0 + x.dot(&z);
        let w = self.vt.tr_mul(&z);
        for (dc, wc) in d.iter_mut().zip(w.iter()) {
            *dc -= wc * wc / denom;
        }
        minv.ger(-1.0 / denom, &z, &z, 1.0);
    }

    /// Rank-one downdate of `M` and `d` after removing the design row `x`.
    fn remove_update(&self, minv: &mut DMatrix<f64>, d: &mut [f64], x: &DVector<f64>) {
        let z = &*minv * x;
        let denom = 1.0 - x.dot(&z);
        let w = self.vt.tr_mul(&z);
        for (dc, wc) in d.iter_mut().zip(w.iter()) {
            *dc += wc * wc / denom;
        }
        minv.ger(1.0 / denom, &z, &z, 1.0);
    }

    fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.design.len(), self.k, |i, j| self.design[i][j])
    }

    fn log_det(&self) -> f64 {
        match self.gram().cholesky() {
            Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        }
    }

    fn picked_rows(&self) -> Vec<usize> {
        self.picked.iter().map(|&c| self.rows[c]).collect()
    }
}

/// Greedy S-optimal augmentation of the current design (`current_std` in
/// standard space), one point at a time.
pub fn s_optimal_select(
    pool: &CandidatePool,
    basis: &[MultiIndex],
    n_new: usize,
    current_std: &DMatrix<f64>,
) -> Result<Selection> {
    let mut g = Greedy::new(pool, basis, current_std, n_new)?;
    g.singular_phase(n_new, true)?;
    if g.picked.len() < n_new {
        let k = g.k;
        let mut minv = g.inverse_gram()?;
        let mut d = g.variance_function(&minv);
        let mut norms: Vec<f64> = (0..k).map(|j| g.design.iter().map(|v| v[j] * v[j]).sum()).collect();
        let nc = g.rows.len();
        let mut score = vec![0.0; nc];
        while g.picked.len() < n_new {
            let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
            for (c, s) in score.iter_mut().enumerate() {
                if g.taken[c] {
                    continue;
                }
                let col = g.vt.column(c);
                let mut log_norms = 0.0;
                let mut prod = 1.0;
                for (j, (&v, &iv)) in col.iter().zip(&inv).enumerate() {
                    prod *= 1.0 + v * v * iv;
                    if (j + 1) % LOG_CHUNK == 0 {
                        log_norms += prod.ln();
                        prod = 1.0;
                    }
                }
                log_norms += prod.ln();
                *s = d[c].ln_1p() - log_norms;
            }
            let c = argmax_first(&score, |c| !g.taken[c]).expect("pool holds enough rows");
            let x = g.vt.column(c).clone_owned();
            g.add_update(&mut minv, &mut d, &x);
            for (n, v) in norms.iter_mut().zip(x.iter()) {
                *n += v * v;
            }
            g.take(c);
        }
    }
    let criterion = s_value_matrix(&g.design_matrix());
    Ok(Selection {
        rows: g.picked_rows(),
        criterion,
    })
}

/// Fedorov-exchange D-optimal augmentation of the current design. The
/// current rows stay fixed; only the `n_new` added rows are exchanged.
pub fn d_optimal_select(
    pool: &CandidatePool,
    basis: &[MultiIndex],
    n_new: usize,
    current_std: &DMatrix<f64>,
    options: &FedorovOptions,
) -> Result<Selection> {
    let mut g = Greedy::new(pool, basis, current_std, n_new)?;
    let frozen = g.design.len();
    if frozen + n_new < g.k {
        return Err(Error::SingularDesign(format!(
            "{} points cannot determine {} coefficients",
            frozen + n_new,
            g.k
        )));
    }
    // with a full-rank frozen design every start shares its inverse and variances
    let base = if frozen >= g.k {
        g.inverse_gram().ok().map(|m| {
            let d = g.variance_function(&m);
            (m, d)
        })
    } else {
        None
    };
    let (minv, d) = greedy_d_start(&mut g, n_new, None, base.as_ref())?;
    fedorov_exchange(&mut g, frozen, options, minv, d)?;
    let mut best = (g.log_det(), g.picked.clone());

    // restarts seed the greedy start with a random first point
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.restarts {
        let first = rng.random_range(0..g.rows.len());
        g.design.truncate(frozen);
        g.taken.iter_mut().for_each(|t| *t = false);
        g.picked.clear();
        let Ok((minv, d)) = greedy_d_start(&mut g, n_new, Some(first), base.as_ref()) else {
            continue;
        };
        fedorov_exchange(&mut g, frozen, options, minv, d)?;
        let ld = g.log_det();
        if ld > best.0 {
            best = (ld, g.picked.clone());
        }
    }
    if !best.0.is_finite() {
        return Err(Error::SingularDesign("exchange converged to a singular design".into()));
    }
    Ok(Selection {
        rows: best.1.iter().map(|&c| g.rows[c]).collect(),
        criterion: best.0,
    })
}

type Inverse = (DMatrix<f64>, Vec<f64>);

/// Greedy D start: singular phase, then largest prediction variance. Returns
/// the inverse information matrix and candidate variances of the start.
fn greedy_d_start(g: &mut Greedy<'_>, n_new: usize, first: Option<usize>, base: Option<&Inverse>) -> Result<Inverse> {
    let (mut minv, mut d) = match base {
        Some((m, d)) => {
            let (mut m, mut d) = (m.clone(), d.clone());
            if let Some(c) = first {
                let x = g.vt.column(c).clone_owned();
                g.add_update(&mut m, &mut d, &x);
                g.take(c);
            }
            (m, d)
        }
        None => {
            if let Some(c) = first {
                g.take(c);
            }
            g.singular_phase(n_new, false)?;
            let m = g.inverse_gram()?;
            let d = g.variance_function(&m);
            (m, d)
        }
    };
    while g.picked.len() < n_new {
        let c = argmax_first(&d, |c| !g.taken[c]).expect("pool holds enough rows");
        let x = g.vt.column(c).clone_owned();
        g.add_update(&mut minv, &mut d, &x);
        g.take(c);
    }
    Ok((minv, d))
}

/// Modified Fedorov exchange: each free design point is swapped with the
/// candidate of largest determinant gain while the gain exceeds the tolerance.
fn fedorov_exchange(
    g: &mut Greedy<'_>,
    frozen: usize,
    options: &FedorovOptions,
    mut minv: DMatrix<f64>,
    mut d: Vec<f64>,
) -> Result<()> {
    let nc = g.rows.len();
    for _ in 0..options.max_passes {
        let mut improved = false;
        for slot in 0..g.picked.len() {
            let ci = g.picked[slot];
            let xi = g.vt.column(ci).clone_owned();
            let zi = &minv * &xi;
            let di = xi.dot(&zi);
            let zs = zi.as_slice();
            let mut best_gain = options.tolerance;
            let mut best_c = None;
            for c in 0..nc {
                // the gain is bounded by d_c - d_i
                if g.taken[c] || d[c] - di <= options.tolerance {
                    continue;
                }
                let dij = dot_col(&g.vt, c, zs);
                let gain = (1.0 + d[c]) * (1.0 - di) + dij * dij - 1.0;
                if gain > best_gain {
                    best_gain = gain;
                    best_c = Some(c);
                }
            }
            if let Some(cj) = best_c {
                let xj = g.vt.column(cj).clone_owned();
                g.add_update(&mut minv, &mut d, &xj);
                g.remove_update(&mut minv, &mut d, &xi);
                g.taken[ci] = false;
                g.taken[cj] = true;
                g.picked[slot] = cj;
                g.design[frozen + slot] = xj;
                improved = true;
            }
        }
        if !improved {
            break;
        }
        minv = g.inverse_gram()?;
    }
    Ok(())
}
