//! Candidate pools, optimal point selection and the sequential enrichment loop.

mod pool;
mod select;
mod sequential;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use pool::{basis_columns, CandidatePool};
pub use select::{d_optimal_select, s_optimal_select, seq_maximin_select, FedorovOptions, Selection};
pub use sequential::{
    adaptive_sequential_run, evaluate_design, EnrichmentStep, Oracle, RunRecord, SequentialConfig, SequentialOutcome,
    StepRecord, Strategy,
};

/// Evaluated design points in the three coordinate systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalDesign {
    pub unit: DMatrix<f64>,
    pub standard: DMatrix<f64>,
    pub physical: DMatrix<f64>,
    pub responses: Vec<f64>,
    /// Enrichment batch that added each point, 0 for the initial design.
    pub batch: Vec<usize>,
}

impl ExperimentalDesign {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.unit.ncols()
    }

    fn append(
        &mut self,
        unit: &DMatrix<f64>,
        standard: &DMatrix<f64>,
        physical: &DMatrix<f64>,
        y: &[f64],
        batch: usize,
    ) {
        self.unit = stack(&self.unit, unit);
        self.standard = stack(&self.standard, standard);
        self.physical = stack(&self.physical, physical);
        self.responses.extend_from_slice(y);
        self.batch.extend(std::iter::repeat_n(batch, y.len()));
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = a.clone().resize_vertically(n + b.nrows(), 0.0);
    out.rows_mut(n, b.nrows()).copy_from(b);
    out
}
