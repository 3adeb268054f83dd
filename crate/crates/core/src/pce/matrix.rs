use nalgebra::DMatrix;

use super::basis::{MultiIndex, MultiIndexSet};
use crate::error::{Error, Result};
use crate::input::PolyFamily;

/// Univariate polynomial values for a batch of standard-space points,
/// `values[(i * dim + k) * (max_degree + 1) + d] = psi_d(x_ik)`.
#[derive(Debug, Clone)]
pub struct UnivariateTable {
    rows: usize,
    dim: usize,
    stride: usize,
    values: Vec<f64>,
}

impl UnivariateTable {
    pub fn new(points: &DMatrix<f64>, families: &[PolyFamily], max_degree: u32) -> Result<Self> {
        let (rows, dim) = points.shape();
        if families.len() != dim {
            return Err(Error::Dimension {
                expected: families.len(),
                actual: dim,
            });
        }
        let stride = max_degree as usize + 1;
        let mut values = vec![0.0; rows * dim * stride];
        for i in 0..rows {
            for (k, fam) in families.iter().enumerate() {
                let x = points[(i, k)];
                if !x.is_finite() {
                    return Err(Error::NonFinite { row: i, column: k });
                }
                let start = (i * dim + k) * stride;
                fam.eval_all(x, &mut values[start..start + stride]);
            }
        }
        Ok(Self {
            rows,
            dim,
            stride,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        (self.stride - 1) as u32
    }

    #[inline]
    pub fn value(&self, row: usize, var: usize, degree: u32) -> f64 {
        self.values[(row * self.dim + var) * self.stride + degree as usize]
    }

    /// `Psi_alpha(x_row)` from the sparse form of `alpha`.
    #[inline]
    pub fn term(&self, row: usize, sparse: &[(usize, u32)]) -> f64 {
        let base = row * self.dim;
        sparse.iter().fold(1.0, |acc, &(k, d)| {
            acc * self.values[(base + k) * self.stride + d as usize]
        })
    }

    /// Model matrix over all rows for the given terms.
    pub fn model_matrix(&self, indices: &[MultiIndex]) -> Result<DMatrix<f64>> {
        let sparse = self.sparse_terms(indices)?;
        let mut a = DMatrix::zeros(self.rows, indices.len());
        for (j, s) in sparse.iter().enumerate() {
            let col = a.column_mut(j);
            for (i, v) in col.into_iter().enumerate() {
                *v = self.term(i, s);
            }
        }
        Ok(a)
    }

    /// Model matrix restricted to a subset of rows.
    pub fn model_matrix_rows(&self, indices: &[MultiIndex], rows: &[usize]) -> Result<DMatrix<f64>> {
        let sparse = self.sparse_terms(indices)?;
        let mut a = DMatrix::zeros(rows.len(), indices.len());
        for (j, s) in sparse.iter().enumerate() {
            for (r, &i) in rows.iter().enumerate() {
                a[(r, j)] = self.term(i, s);
            }
        }
        Ok(a)
    }

    pub(crate) fn sparse_terms(&self, indices: &[MultiIndex]) -> Result<Vec<Vec<(usize, u32)>>> {
        indices
            .iter()
            .map(|a| {
                if a.dim() != self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        actual: a.dim(),
                    });
                }
                let s = a.sparse();
                if let Some(&(_, d)) = s.iter().find(|(_, d)| *d > self.max_degree()) {
                    return Err(Error::InvalidArgument(format!(
                        "degree {d} exceeds tabulated maximum {}",
                        self.max_degree()
                    )));
                }
                Ok(s)
            })
            .collect()
    }
}

/// Basis evaluations `A_ij = Psi_j(x_i)` (rows are design points).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    matrix: DMatrix<f64>,
}

impl ModelMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Columns `cols` in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> ModelMatrix {
        let mut m = DMatrix::zeros(self.nrows(), cols.len());
        for (j, &c) in cols.iter().enumerate() {
            m.set_column(j, &self.matrix.column(c));
        }
        ModelMatrix::new(m)
    }
}

/// Evaluates the tensor-product basis at standard-space points.
pub fn eval_model_matrix(basis: &MultiIndexSet, families: &[PolyFamily], points: &DMatrix<f64>) -> Result<ModelMatrix> {
    if points.ncols() != basis.dim() {
        return Err(Error::Dimension {
            expected: basis.dim(),
            actual: points.ncols(),
        });
    }
    let table = UnivariateTable::new(points, families, basis.max_degree())?;
    Ok(ModelMatrix::new(table.model_matrix(basis.indices())?))
}
