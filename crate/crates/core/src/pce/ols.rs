use nalgebra::{DMatrix, DVector};

use super::matrix::ModelMatrix;
use crate::error::{Error, Result};

/// Leverages at or above this value make the analytic LOO estimate degenerate.
pub const LEVERAGE_LIMIT: f64 = 1.0 - 1e-12;

/// Diagonal ratio of R below which the least-squares system counts as singular.
const RANK_TOLERANCE: f64 = 1e-12;

/// Thin QR factors of a full-column-rank model matrix.
struct Factorization {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn factorize(a: &DMatrix<f64>) -> Result<Factorization> {
    let (n, p) = a.shape();
    if p == 0 {
        return Err(Error::InvalidArgument("model matrix has no columns".into()));
    }
    if n < p {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= RANK_TOLERANCE * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::Singular { condition });
    }
    Ok(Factorization { q: qr.q(), r })
}

impl Factorization {
    fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("triangular factor checked non-singular")
    }

    fn leverages(&self) -> Vec<f64> {
        self.q.row_iter().map(|row| row.iter().map(|v| v * v).sum()).collect()
    }
}

fn check_rows(a: &ModelMatrix, y: &[f64]) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Ordinary least-squares coefficients via Householder QR.
pub fn ols_fit(a: &ModelMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_rows(a, y)?;
    let f = factorize(a.matrix())?;
    Ok(f.solve(&DVector::from_column_slice(y)).as_slice().to_vec())
}

/// Diagonal of the hat matrix `A (A^T A)^{-1} A^T`.
pub fn hat_diagonal(a: &ModelMatrix) -> Result<Vec<f64>> {
    Ok(factorize(a.matrix())?.leverages())
}

fn centered_sum_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

fn loo_from_parts(y: &[f64], fitted: &[f64], leverages: &[f64]) -> Result<f64> {
    let denom = centered_sum_squares(y);
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut num = 0.0;
    for (i, ((&yi, &fi), &h)) in y.iter().zip(fitted).zip(leverages).enumerate() {
        if h >= LEVERAGE_LIMIT {
            return Err(Error::DegenerateLoo { index: i, leverage: h });
        }
        num += ((yi - fi) / (1.0 - h)).powi(2);
    }
    Ok(num / denom)
}

/// Relative leave-one-out error of an OLS fit from the hat-matrix diagonal.
pub fn loo_error(a: &ModelMatrix, y: &[f64], coefficients: &[f64]) -> Result<f64> {
    check_rows(a, y)?;
    if coefficients.len() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            actual: coefficients.len(),
        });
    }
    let f = factorize(a.matrix())?;
    let fitted = a.matrix() * DVector::from_column_slice(coefficients);
    loo_from_parts(y, fitted.as_slice(), &f.leverages())
}

/// OLS coefficients together with their LOO error, sharing one factorization.
pub fn ols_with_loo(a: &ModelMatrix, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_rows(a, y)?;
    let f = factorize(a.matrix())?;
    let c = f.solve(&DVector::from_column_slice(y));
    let fitted = a.matrix() * &c;
    let loo = loo_from_parts(y, fitted.as_slice(), &f.leverages())?;
    Ok((c.as_slice().to_vec(), loo))
}
