use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::input::{InputModel, PolyFamily};
use crate::pce::MultiIndex;
use crate::sampling::sobol_points;

/// Large candidate set from which design points are selected.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    unit: DMatrix<f64>,
    standard: DMatrix<f64>,
    families: Vec<PolyFamily>,
    available: Vec<bool>,
}

impl CandidatePool {
    /// Pool from unit-hypercube points, mapped to the standard space of `input`.
    pub fn new(input: &InputModel, unit: DMatrix<f64>) -> Result<Self> {
        let standard = input.unit_to_standard(&unit)?;
        let available = vec![true; unit.nrows()];
        Ok(Self {
            unit,
            standard,
            families: input.poly_families(),
            available,
        })
    }

    /// Sobol' points `offset + 1 ..= offset + size`.
    pub fn sobol(input: &InputModel, size: usize, offset: u64) -> Result<Self> {
        Self::new(input, sobol_points(size, input.dim(), offset)?)
    }

    pub fn len(&self) -> usize {
        self.unit.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.unit.ncols()
    }

    pub fn unit(&self) -> &DMatrix<f64> {
        &self.unit
    }

    pub fn standard(&self) -> &DMatrix<f64> {
        &self.standard
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn is_available(&self, row: usize) -> bool {
        self.available[row]
    }

    pub fn available_count(&self) -> usize {
        self.available.iter().filter(|&&a| a).count()
    }

    pub fn available_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.available[i]).collect()
    }

    /// Marks rows as consumed by the design.
    pub fn mark_used(&mut self, rows: &[usize]) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        if let Some(r) = rows
            .iter()
            .find(|&&r| r >= self.len() || !self.available[r] || !seen.insert(r))
        {
            return Err(Error::InvalidArgument(format!("pool row {r} is not available")));
        }
        for &r in rows {
            self.available[r] = false;
        }
        Ok(())
    }

    pub(crate) fn require(&self, n_new: usize) -> Result<Vec<usize>> {
        let rows = self.available_rows();
        if rows.len() < n_new {
            return Err(Error::PoolExhausted {
                requested: n_new,
                available: rows.len(),
            });
        }
        Ok(rows)
    }
}

/// Transposed model matrix: column `c` holds the basis evaluated at point `rows[c]`
/// (all rows when `rows` is `None`). Points are in standard space.
pub fn basis_columns(
    points: &DMatrix<f64>,
    rows: Option<&[usize]>,
    families: &[PolyFamily],
    basis: &[MultiIndex],
) -> Result<DMatrix<f64>> {
    let m = points.ncols();
    if families.len() != m {
        return Err(Error::Dimension {
            expected: families.len(),
            actual: m,
        });
    }
    if let Some(bad) = basis.iter().find(|a| a.dim() != m) {
        return Err(Error::Dimension {
            expected: m,
            actual: bad.dim(),
        });
    }
    let stride = basis.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0) as usize + 1;
    let sparse: Vec<Vec<(usize, u32)>> = basis.iter().map(|a| a.sparse()).collect();
    let used: Vec<usize> = {
        let mut u: Vec<usize> = sparse.iter().flatten().map(|&(k, _)| k).collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    let count = rows.map_or(points.nrows(), |r| r.len());
    let mut out = DMatrix::zeros(basis.len(), count);
    let mut buf = vec![0.0; m * stride];
    for c in 0..count {
        let i = rows.map_or(c, |r| r[c]);
        for &k in &used {
            let x = points[(i, k)];
            if !x.is_finite() {
                return Err(Error::NonFinite { row: i, column: k });
            }
            families[k].eval_all(x, &mut buf[k * stride..(k + 1) * stride]);
        }
        let mut col = out.column_mut(c);
        for (j, s) in sparse.iter().enumerate() {
            col[j] = s.iter().fold(1.0, |acc, &(k, d)| acc * buf[k * stride + d as usize]);
        }
    }
    Ok(out)
}
