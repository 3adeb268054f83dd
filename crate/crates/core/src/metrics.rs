//! Space-filling and information-matrix quality measures of a design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pce::ModelMatrix;

/// Diagonal of the normalized Cholesky factor below which the Gram matrix counts as singular.
const S_PIVOT_TOLERANCE: f64 = 1e-7;

/// Space-filling and regression-quality scores of one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignScore {
    pub maximin: f64,
    pub discrepancy_sq: f64,
    pub cond_number: Option<f64>,
    pub s_value: Option<f64>,
}

/// Smallest squared pairwise distance.
pub(crate) fn min_distance_sq(points: &DMatrix<f64>) -> f64 {
    let (n, m) = points.shape();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d = 0.0;
            for k in 0..m {
                let t = points[(i, k)] - points[(j, k)];
                d += t * t;
            }
            best = best.min(d);
        }
    }
    best
}

/// Smallest Euclidean distance between two distinct design points.
pub fn maximin_distance(points: &DMatrix<f64>) -> Result<f64> {
    if points.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximin distance needs at least 2 points, got {}",
            points.nrows()
        )));
    }
    Ok(min_distance_sq(points).sqrt())
}

/// Squared centred L2 discrepancy of a design in the unit hypercube.
pub fn centered_l2_discrepancy(points: &DMatrix<f64>) -> Result<f64> {
    let (n, m) = points.shape();
    if n == 0 {
        return Err(Error::InvalidArgument("discrepancy of an empty design".into()));
    }
    for k in 0..m {
        for i in 0..n {
            let v = points[(i, k)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    coordinate: k,
                    value: v,
                    reason: "discrepancy requires points in [0,1]".into(),
                });
            }
        }
    }
    let dev: Vec<f64> = points.iter().map(|v| (v - 0.5).abs()).collect();
    // column-major: entry (i,k) at k * n + i
    let at = |i: usize, k: usize| dev[k * n + i];
    let mut single = 0.0;
    for i in 0..n {
        let mut prod = 1.0;
        for k in 0..m {
            let d = at(i, k);
            prod *= 1.0 + 0.5 * d - 0.5 * d * d;
        }
        single += prod;
    }
    let mut pair = 0.0;
    for i in 0..n {
        let mut diag = 1.0;
        for k in 0..m {
            diag *= 1.0 + at(i, k);
        }
        pair += diag;
        for j in (i + 1)..n {
            let mut prod = 1.0;
            for k in 0..m {
                let cross = (points[(i, k)] - points[(j, k)]).abs();
                prod *= 1.0 + 0.5 * at(i, k) + 0.5 * at(j, k) - 0.5 * cross;
            }
            pair += 2.0 * prod;
        }
    }
    let nf = n as f64;
    Ok((13.0f64 / 12.0).powi(m as i32) - 2.0 / nf * single + pair / (nf * nf))
}

/// 2-norm condition number of the model matrix (`+inf` when rank deficient).
pub fn condition_number(a: &ModelMatrix) -> Result<f64> {
    let (n, p) = (a.nrows(), a.ncols());
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("condition number of an empty matrix".into()));
    }
    if a.matrix().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("condition number of a zero matrix".into()));
    }
    if n < p {
        return Ok(f64::INFINITY);
    }
    let sv = a.matrix().clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= smax * f64::EPSILON * n.max(p) as f64 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// S-value `(sqrt(det A^T A) / prod_i |A_i|)^(1/P)` of a model matrix.
///
/// Zero columns and underdetermined matrices score 0.
pub fn s_value(a: &ModelMatrix) -> f64 {
    s_value_matrix(a.matrix())
}

pub(crate) fn s_value_matrix(a: &DMatrix<f64>) -> f64 {
    let (n, k) = a.shape();
    if k == 0 || n < k {
        return 0.0;
    }
    let mut normalized = a.clone();
    for mut col in normalized.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            log::warn!("S-value of a matrix with a zero column is taken as 0");
            return 0.0;
        }
        col /= norm;
    }
    let gram = normalized.tr_mul(&normalized);
    let Some(chol) = gram.cholesky() else {
        return 0.0;
    };
    let l = chol.l_dirty();
    let mut log_sum = 0.0;
    for i in 0..k {
        let d = l[(i, i)];
        if !(d > S_PIVOT_TOLERANCE) {
            return 0.0;
        }
        log_sum += d.ln();
    }
    (log_sum / k as f64).exp().min(1.0)
}

/// Largest absolute Pearson correlation between two design columns.
pub fn max_abs_correlation(points: &DMatrix<f64>) -> f64 {
    let (n, m) = points.shape();
    if n < 2 || m < 2 {
        return 0.0;
    }
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let c = points.column(k);
            let mu = c.mean();
            let centred: Vec<f64> = c.iter().map(|v| v - mu).collect();
            let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                centred.iter().map(|v| v / norm).collect()
            } else {
                vec![0.0; n]
            }
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            let r: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Scores a unit-hypercube design, and optionally its model matrix.
pub fn score_design(unit_points: &DMatrix<f64>, model_matrix: Option<&ModelMatrix>) -> Result<DesignScore> {
    let (cond_number, s_value) = match model_matrix {
        Some(a) => (Some(condition_number(a)?), Some(s_value(a))),
        None => (None, None),
    };
    Ok(DesignScore {
        maximin: maximin_distance(unit_points)?,
        discrepancy_sq: centered_l2_discrepancy(unit_points)?,
        cond_number,
        s_value,
    })
}
