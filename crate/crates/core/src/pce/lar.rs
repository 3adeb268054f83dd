//! Least angle regression with a hybrid OLS leave-one-out score per step.
//!
//! The constant column (column 0 of the model matrix) is always active. The
//! remaining columns are centred and scaled to unit norm on the training
//! sample, and the path walks the equiangular direction of the active set.
//! A single modified Gram–Schmidt factorization of `[1, X_active]` serves
//! both the equiangular direction and the leverages of the OLS refit.

use nalgebra::{DMatrix, DVector};

use super::basis::MultiIndexSet;
use super::matrix::{ModelMatrix, UnivariateTable};
use super::model::{PceTerm, SparsePce};
use super::ols::{ols_with_loo, LEVERAGE_LIMIT};
use crate::error::{Error, Result};
use crate::input::InputModel;

/// Orthogonal residual norm (of a unit-norm column) below which it counts as dependent.
const DEPENDENCE_TOLERANCE: f64 = 1e-10;
/// Relative size of the maximal correlation at which the path stops.
const CORRELATION_TOLERANCE: f64 = 1e-12;

/// Active set after one LAR step and the LOO error of its OLS refit.
#[derive(Debug, Clone, PartialEq)]
pub struct LarStep {
    /// Column indices in entry order; always starts with the constant column 0.
    pub active: Vec<usize>,
    pub loo: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarPath {
    pub steps: Vec<LarStep>,
}

impl LarPath {
    /// Step with the smallest LOO error; ties go to the earlier step.
    pub fn best(&self) -> &LarStep {
        let mut best = &self.steps[0];
        for s in &self.steps[1..] {
            if s.loo < best.loo {
                best = s;
            }
        }
        best
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn zero_variance(y: &[f64]) -> bool {
    let m = mean(y);
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sst: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    sst <= (f64::EPSILON * scale).powi(2) * y.len() as f64
}

fn loo_score(residual: &[f64], leverage: &[f64], sst: f64) -> f64 {
    let mut num = 0.0;
    for (r, &h) in residual.iter().zip(leverage) {
        if h >= LEVERAGE_LIMIT {
            return f64::INFINITY;
        }
        num += (r / (1.0 - h)).powi(2);
    }
    num / sst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Computes the LAR path of `a` (column 0 must be the constant term).
pub fn lar_path(a: &ModelMatrix, y: &[f64]) -> Result<LarPath> {
    let (n, p) = (a.nrows(), a.ncols());
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("LAR needs at least 2 points, got {n}")));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("model matrix has no columns".into()));
    }
    if zero_variance(y) {
        return Ok(LarPath {
            steps: vec![LarStep {
                active: vec![0],
                loo: 0.0,
            }],
        });
    }
    let m = p.min(n - 1);
    let nf = n as f64;

    // standardized regressors
    let mut x = a.matrix().clone();
    let mut usable = vec![true; p];
    usable[0] = false;
    for j in 1..p {
        let mut col = x.column_mut(j);
        let raw = col.norm();
        let mu = col.mean();
        col.add_scalar_mut(-mu);
        let norm = col.norm();
        if norm <= DEPENDENCE_TOLERANCE * raw || norm == 0.0 {
            usable[j] = false;
            col.fill(0.0);
        } else {
            col /= norm;
        }
    }

    let ybar = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let sst = dot(&yc, &yc);

    let mut leverage = vec![1.0 / nf; n];
    let mut residual = yc.clone();
    let mut steps = vec![LarStep {
        active: vec![0],
        loo: loo_score(&residual, &leverage, sst),
    }];

    let mut c: Vec<f64> = x.tr_mul(&DVector::from_column_slice(&yc)).as_slice().to_vec();
    let mut active = vec![false; p];
    active[0] = true;
    let q0 = 1.0 / nf.sqrt();
    // q holds the orthonormal basis of the non-constant active columns
    let mut q: Vec<Vec<f64>> = Vec::new();
    // r_cols[l][i] = <q_i, x_{order[l]}>
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut order: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();

    let mut next = None;
    let mut big_c = 0.0;
    for j in 1..p {
        if usable[j] && c[j].abs() > big_c {
            big_c = c[j].abs();
            next = Some(j);
        }
    }
    let c_scale = big_c;
    if c_scale <= 0.0 || steps.len() >= m {
        return Ok(LarPath { steps });
    }

    while let Some(j) = next.take() {
        let mut v: Vec<f64> = x.column(j).iter().copied().collect();
        let mut coef = vec![0.0; q.len()];
        for _ in 0..2 {
            let s0 = v.iter().sum::<f64>() * q0;
            v.iter_mut().for_each(|t| *t -= s0 * q0);
            for (l, ql) in q.iter().enumerate() {
                let s = dot(ql, &v);
                coef[l] += s;
                axpy(-s, ql, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < DEPENDENCE_TOLERANCE {
            usable[j] = false;
        } else {
            v.iter_mut().for_each(|t| *t /= norm);
            coef.push(norm);
            for (h, qi) in leverage.iter_mut().zip(&v) {
                *h += qi * qi;
            }
            let s = dot(&v, &residual);
            axpy(-s, &v, &mut residual);
            q.push(v);
            r_cols.push(coef);
            active[j] = true;
            order.push(j);
            signs.push(if c[j] >= 0.0 { 1.0 } else { -1.0 });
            let mut set = Vec::with_capacity(order.len() + 1);
            set.push(0);
            set.extend_from_slice(&order);
            steps.push(LarStep {
                active: set,
                loo: loo_score(&residual, &leverage, sst),
            });
            if steps.len() >= m {
                break;
            }
        }
        if order.is_empty() {
            big_c = 0.0;
            for k in 1..p {
                if usable[k] && !active[k] && c[k].abs() > big_c {
                    big_c = c[k].abs();
                    next = Some(k);
                }
            }
            continue;
        }

        // equiangular direction u = Q z / |z| with R^T z = s
        let k = order.len();
        let mut z = vec![0.0; k];
        for l in 0..k {
            let rc = &r_cols[l];
            let acc: f64 = (0..l).map(|i| rc[i] * z[i]).sum();
            z[l] = (signs[l] - acc) / rc[l];
        }
        let zn = dot(&z, &z).sqrt();
        let a_a = 1.0 / zn;
        let mut u = vec![0.0; n];
        for (ql, zl) in q.iter().zip(&z) {
            axpy(zl / zn, ql, &mut u);
        }
        let av = x.tr_mul(&DVector::from_vec(u));

        let mut gamma = big_c / a_a;
        for jj in 1..p {
            if !usable[jj] || active[jj] {
                continue;
            }
            for (num, den) in [(big_c - c[jj], a_a - av[jj]), (big_c + c[jj], a_a + av[jj])] {
                if den > 1e-14 * a_a {
                    let g = num / den;
                    if g > 0.0 && g < gamma {
                        gamma = g;
                        next = Some(jj);
                    }
                }
            }
        }
        for (cj, aj) in c.iter_mut().zip(av.iter()) {
            *cj -= gamma * aj;
        }
        big_c -= gamma * a_a;
        if big_c <= CORRELATION_TOLERANCE * c_scale {
            break;
        }
    }
    Ok(LarPath { steps })
}

/// Active-set selection by LAR followed by an OLS refit of the best step.
/// Returns the selected column indices, their coefficients and the LOO error.
pub fn hybrid_lar_matrix(a: &ModelMatrix, y: &[f64]) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    if a.nrows() >= 2 && a.nrows() == y.len() && zero_variance(y) {
        return Ok((vec![0], vec![mean(y)], 0.0));
    }
    let path = lar_path(a, y)?;
    let best = path.best();
    let sub = a.select_columns(&best.active);
    let (coef, loo) = ols_with_loo(&sub, y)?;
    Ok((best.active.clone(), coef, loo))
}

/// Hybrid LAR fit on the candidate basis from standard-space training points.
pub fn hybrid_lar_fit(input: &InputModel, basis: &MultiIndexSet, x_std: &DMatrix<f64>, y: &[f64]) -> Result<SparsePce> {
    if x_std.ncols() != input.dim() || basis.dim() != input.dim() {
        return Err(Error::Dimension {
            expected: input.dim(),
            actual: x_std.ncols(),
        });
    }
    let table = UnivariateTable::new(x_std, &input.poly_families(), basis.max_degree())?;
    hybrid_lar_fit_table(input, basis, &table, y)
}

pub(crate) fn hybrid_lar_fit_table(
    input: &InputModel,
    basis: &MultiIndexSet,
    table: &UnivariateTable,
    y: &[f64],
) -> Result<SparsePce> {
    if basis.is_empty() || !basis.indices()[0].is_zero() {
        return Err(Error::InvalidArgument(
            "candidate basis must start with the zero index".into(),
        ));
    }
    let a = ModelMatrix::new(table.model_matrix(basis.indices())?);
    let (cols, coef, loo) = hybrid_lar_matrix(&a, y)?;
    let terms = cols
        .iter()
        .zip(coef)
        .map(|(&j, coefficient)| PceTerm {
            index: basis.indices()[j].clone(),
            coefficient,
        })
        .collect();
    Ok(SparsePce {
        dimension: input.dim(),
        truncation: basis.truncation(),
        terms,
        loo_error: loo,
        input: input.clone(),
    })
}
