use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{MultiIndex, Truncation};
use super::matrix::UnivariateTable;
use crate::error::{Error, Result};
use crate::input::{isoprobabilistic_transform, Direction, InputModel};

/// One retained basis term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceTerm {
    pub index: MultiIndex,
    pub coefficient: f64,
}

/// Sparse polynomial chaos surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePce {
    pub dimension: usize,
    pub truncation: Truncation,
    pub terms: Vec<PceTerm>,
    pub loo_error: f64,
    pub input: InputModel,
}

impl SparsePce {
    pub fn constant(input: InputModel, truncation: Truncation, value: f64) -> Self {
        let dimension = input.dim();
        Self {
            dimension,
            truncation,
            terms: vec![PceTerm {
                index: MultiIndex::zero(dimension),
                coefficient: value,
            }],
            loo_error: 0.0,
            input,
        }
    }

    pub fn degree(&self) -> u32 {
        self.truncation.degree
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        self.terms.iter().map(|t| t.index.clone()).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|t| t.index.0.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Mean of the surrogate output (the zero-index coefficient).
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.index.is_zero())
            .map_or(0.0, |t| t.coefficient)
    }

    /// Variance of the surrogate output.
    pub fn variance(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| !t.index.is_zero())
            .map(|t| t.coefficient * t.coefficient)
            .sum()
    }

    /// Evaluates at standard-space points.
    pub fn predict_standard(&self, points: &DMatrix<f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                actual: points.ncols(),
            });
        }
        let table = UnivariateTable::new(points, &self.input.poly_families(), self.max_degree())?;
        self.predict_table(&table)
    }

    /// Evaluates at every row of a pre-tabulated point set.
    pub fn predict_table(&self, table: &UnivariateTable) -> Result<Vec<f64>> {
        if table.dim() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                actual: table.dim(),
            });
        }
        let sparse = table.sparse_terms(&self.indices())?;
        let coef = self.coefficients();
        Ok((0..table.rows())
            .map(|i| sparse.iter().zip(&coef).map(|(s, c)| c * table.term(i, s)).sum())
            .collect())
    }

    /// Evaluates at unit-hypercube points.
    pub fn predict_unit(&self, unit: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.predict_standard(&self.input.unit_to_standard(unit)?)
    }
}

/// Evaluates the surrogate at physical-space points.
pub fn pce_predict(model: &SparsePce, points: &DMatrix<f64>) -> Result<Vec<f64>> {
    let standard = isoprobabilistic_transform(&model.input, points, Direction::ToStandard)?;
    model.predict_standard(&standard)
}

/// Validation error: mean square error and its ratio to the sample variance.
pub fn prediction_errors(predicted: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            actual: predicted.len(),
        });
    }
    let n = reference.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "validation set needs at least 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mse = predicted
        .iter()
        .zip(reference)
        .map(|(p, y)| (y - p).powi(2))
        .sum::<f64>()
        / nf;
    let mean = reference.iter().sum::<f64>() / nf;
    let var = reference.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / nf;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((mse, mse / var))
}

/// `(MSE, RMSE)` of the surrogate on a physical-space validation set.
pub fn mse_rmse(model: &SparsePce, points: &DMatrix<f64>, responses: &[f64]) -> Result<(f64, f64)> {
    if points.nrows() != responses.len() {
        return Err(Error::Dimension {
            expected: points.nrows(),
            actual: responses.len(),
        });
    }
    prediction_errors(&pce_predict(model, points)?, responses)
}
