use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-variable polynomial degrees of one multivariate basis term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `(sum_i alpha_i^q)^(1/q)`.
    pub fn q_norm(&self, q: f64) -> f64 {
        self.0
            .iter()
            .filter(|&&a| a > 0)
            .map(|&a| (a as f64).powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }

    /// Non-zero entries as `(variable, degree)`.
    pub fn sparse(&self) -> Vec<(usize, u32)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(k, &a)| (k, a))
            .collect()
    }
}

/// Truncation scheme of a candidate basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub degree: u32,
    pub q: f64,
}

/// Candidate set of multi-indices, sorted by total degree and containing
/// the zero index first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    dim: usize,
    truncation: Truncation,
    indices: Vec<MultiIndex>,
}

const Q_NORM_SLACK: f64 = 1e-10;

impl MultiIndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Arbitrary index list (used for sparse active sets).
    pub fn from_indices(dim: usize, truncation: Truncation, indices: Vec<MultiIndex>) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|a| a.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: bad.dim(),
            });
        }
        Ok(Self {
            dim,
            truncation,
            indices,
        })
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0)
    }

    pub fn contains(&self, index: &MultiIndex) -> bool {
        self.indices.contains(index)
    }
}

/// Total-degree (`q = 1`) or hyperbolic (`q < 1`) truncated index set.
pub fn build_basis(dim: usize, degree: u32, q: f64) -> Result<MultiIndexSet> {
    if dim == 0 {
        return Err(Error::InvalidArgument("basis dimension must be at least 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q-norm must lie in (0,1], got {q}")));
    }
    let budget = (degree as f64).powf(q) * (1.0 + Q_NORM_SLACK);
    let mut indices = Vec::new();
    let mut current = vec![0u32; dim];
    enumerate(0, 0, 0.0, degree, q, budget, &mut current, &mut indices);
    indices.sort_by(|a, b| a.total_degree().cmp(&b.total_degree()).then_with(|| b.0.cmp(&a.0)));
    Ok(MultiIndexSet {
        dim,
        truncation: Truncation { degree, q },
        indices,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    k: usize,
    used: u32,
    partial: f64,
    degree: u32,
    q: f64,
    budget: f64,
    current: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if k == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for a in 0..=(degree - used) {
        let term = if a == 0 { 0.0 } else { (a as f64).powf(q) };
        if partial + term > budget {
            break;
        }
        current[k] = a;
        enumerate(k + 1, used + a, partial + term, degree, q, budget, current, out);
    }
    current[k] = 0;
}
