use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::build_basis;
use super::lar::hybrid_lar_fit_table;
use super::matrix::UnivariateTable;
use super::model::SparsePce;
use crate::error::{Error, Result};
use crate::input::InputModel;

/// Truncation range and stopping rule of the degree-adaptive fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PceConfig {
    pub degree_min: u32,
    pub degree_max: u32,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Stop once the LOO error has grown for two consecutive degrees.
    #[serde(default)]
    pub early_stop: bool,
}

fn default_q() -> f64 {
    1.0
}

impl PceConfig {
    pub fn new(degree_min: u32, degree_max: u32, q: f64) -> Self {
        Self {
            degree_min,
            degree_max,
            q,
            early_stop: false,
        }
    }

    pub fn with_early_stop(mut self, on: bool) -> Self {
        self.early_stop = on;
        self
    }
}

impl Default for PceConfig {
    fn default() -> Self {
        Self::new(3, 20, 1.0)
    }
}

/// Hybrid LAR fits for each degree in the range; keeps the smallest LOO
/// error, preferring the lower degree on ties.
pub fn degree_adaptive_fit(
    input: &InputModel,
    config: &PceConfig,
    x_std: &DMatrix<f64>,
    y: &[f64],
) -> Result<SparsePce> {
    if config.degree_min > config.degree_max {
        return Err(Error::InvalidArgument(format!(
            "degree range [{}, {}] is empty",
            config.degree_min, config.degree_max
        )));
    }
    if x_std.ncols() != input.dim() {
        return Err(Error::Dimension {
            expected: input.dim(),
            actual: x_std.ncols(),
        });
    }
    if x_std.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x_std.nrows(),
            actual: y.len(),
        });
    }
    let table = UnivariateTable::new(x_std, &input.poly_families(), config.degree_max)?;
    let mut best: Option<SparsePce> = None;
    let mut previous = f64::INFINITY;
    let mut rises = 0;
    for p in config.degree_min..=config.degree_max {
        let basis = build_basis(input.dim(), p, config.q)?;
        let fit = hybrid_lar_fit_table(input, &basis, &table, y)?;
        let loo = fit.loo_error;
        if best.as_ref().is_none_or(|b| loo < b.loo_error) {
            best = Some(fit);
        }
        if loo > previous {
            rises += 1;
        } else {
            rises = 0;
        }
        previous = loo;
        if config.early_stop && rises >= 2 {
            break;
        }
    }
    Ok(best.expect("degree range is non-empty"))
}
