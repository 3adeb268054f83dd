use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pool::{basis_columns, CandidatePool};
use super::select::{d_optimal_select, s_optimal_select, seq_maximin_select, FedorovOptions};
use super::ExperimentalDesign;
use crate::error::{Error, Result};
use crate::input::InputModel;
use crate::metrics::{score_design, DesignScore};
use crate::pce::{build_basis, degree_adaptive_fit, ModelMatrix, MultiIndex, PceConfig, SparsePce};
use crate::sampling::{optimized_lhs, LhsCriterion};

/// Computational model evaluated at physical input points.
pub trait Oracle {
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, String>;
}

impl<F> Oracle for F
where
    F: Fn(&[f64]) -> std::result::Result<f64, String>,
{
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, String> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SeqSOpt,
    SeqDOpt,
    SeqMaximin,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::SeqSOpt => "seq_s_opt",
            Strategy::SeqDOpt => "seq_d_opt",
            Strategy::SeqMaximin => "seq_maximin",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialConfig {
    pub strategy: Strategy,
    pub pce: PceConfig,
    pub n_init: usize,
    pub n_add: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Candidate LHS designs screened for the initial maximin design.
    pub lhs_candidates: usize,
    pub pool_size: usize,
    /// Index offset into the Sobol' sequence that feeds the pool.
    pub pool_offset: u64,
    /// Builds the D criterion on the active basis instead of the full truncation.
    pub sparse_d_basis: bool,
    pub fedorov: FedorovOptions,
}

impl SequentialConfig {
    pub fn new(strategy: Strategy, pce: PceConfig, n_init: usize, n_add: usize, n_max: usize, seed: u64) -> Self {
        Self {
            strategy,
            pce,
            n_init,
            n_add,
            n_max,
            seed,
            lhs_candidates: 5,
            pool_size: 100_000,
            pool_offset: 0,
            sparse_d_basis: true,
            // the frozen design already fixes most of the information matrix
            fedorov: FedorovOptions {
                restarts: 0,
                seed,
                ..FedorovOptions::default()
            },
        }
    }

    /// Design sizes visited by the loop.
    pub fn schedule(&self) -> Vec<usize> {
        let mut sizes = vec![self.n_init];
        let mut n = self.n_init;
        while n < self.n_max {
            n = (n + self.n_add).min(self.n_max);
            sizes.push(n);
        }
        sizes
    }

    fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::InvalidArgument("initial design needs at least 2 points".into()));
        }
        if self.n_max < self.n_init {
            return Err(Error::InvalidArgument(format!(
                "maximum size {} is below the initial size {}",
                self.n_max, self.n_init
            )));
        }
        if self.n_add == 0 && self.n_max > self.n_init {
            return Err(Error::InvalidArgument("enrichment batch size is zero".into()));
        }
        Ok(())
    }
}

/// State of the loop after one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub n: usize,
    pub loo: f64,
    pub rmse: Option<f64>,
    pub degree: u32,
    pub n_terms: usize,
    pub score: DesignScore,
    pub basis: Vec<MultiIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentStep {
    pub iteration: usize,
    /// Pool rows added to the design.
    pub added: Vec<usize>,
    /// Basis the criterion was built on; empty for geometric selection.
    pub basis: Vec<MultiIndex>,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub schedule: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub enrichments: Vec<EnrichmentStep>,
}

#[derive(Debug, Clone)]
pub struct SequentialOutcome {
    pub model: SparsePce,
    pub record: RunRecord,
    pub design: ExperimentalDesign,
}

fn evaluate_rows(oracle: &dyn Oracle, physical: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..physical.nrows())
        .map(|i| {
            let x: Vec<f64> = physical.row(i).iter().copied().collect();
            match oracle.evaluate(&x) {
                Ok(y) if y.is_finite() => Ok(y),
                Ok(y) => Err(Error::Oracle {
                    point: x,
                    message: format!("non-finite response {y}"),
                }),
                Err(message) => Err(Error::Oracle { point: x, message }),
            }
        })
        .collect()
}

/// Evaluates the oracle on a unit-hypercube design.
pub fn evaluate_design(oracle: &dyn Oracle, input: &InputModel, unit: DMatrix<f64>) -> Result<ExperimentalDesign> {
    let standard = input.unit_to_standard(&unit)?;
    let physical = input.unit_to_physical(&unit)?;
    let responses = evaluate_rows(oracle, &physical)?;
    Ok(ExperimentalDesign {
        batch: vec![0; unit.nrows()],
        unit,
        standard,
        physical,
        responses,
    })
}

fn step_record(
    iteration: usize,
    model: &SparsePce,
    design: &ExperimentalDesign,
    rmse: Option<f64>,
) -> Result<StepRecord> {
    let basis = model.indices();
    let a = basis_columns(&design.standard, None, &model.input.poly_families(), &basis)?.transpose();
    let score = score_design(&design.unit, Some(&ModelMatrix::new(a)))?;
    Ok(StepRecord {
        iteration,
        n: design.len(),
        loo: model.loo_error,
        rmse,
        degree: model.degree(),
        n_terms: model.terms.len(),
        score,
        basis,
    })
}

/// Sequential design loop: fit, select a batch from the pool with the chosen
/// criterion, evaluate, and repeat until `n_max` points. `observer` is called
/// after each fit and may return a validation RMSE for the record.
pub fn adaptive_sequential_run(
    oracle: &dyn Oracle,
    input: &InputModel,
    config: &SequentialConfig,
    observer: &mut dyn FnMut(&SparsePce, &ExperimentalDesign) -> Option<f64>,
) -> Result<SequentialOutcome> {
    config.validate()?;
    let m = input.dim();
    let init = optimized_lhs(
        config.n_init,
        m,
        config.seed,
        LhsCriterion::Maximin,
        config.lhs_candidates,
    )?;
    let mut design = evaluate_design(oracle, input, init.into_points())?;
    let mut pool = if config.n_max > config.n_init {
        Some(CandidatePool::sobol(input, config.pool_size, config.pool_offset)?)
    } else {
        None
    };
    let mut record = RunRecord {
        strategy: config.strategy,
        schedule: config.schedule(),
        steps: Vec::new(),
        enrichments: Vec::new(),
    };
    let mut iteration = 0;
    loop {
        let model = degree_adaptive_fit(input, &config.pce, &design.standard, &design.responses)?;
        let rmse = observer(&model, &design);
        record.steps.push(step_record(iteration, &model, &design, rmse)?);
        log::debug!(
            "{} iteration {iteration}: N = {}, LOO = {:.3e}, {} terms",
            config.strategy,
            design.len(),
            model.loo_error,
            model.terms.len()
        );
        let pool = match (&mut pool, design.len() < config.n_max) {
            (Some(p), true) => p,
            _ => return Ok(SequentialOutcome { model, record, design }),
        };
        let batch = config.n_add.min(config.n_max - design.len());
        iteration += 1;
        let (selection, basis) = match config.strategy {
            Strategy::SeqMaximin => (seq_maximin_select(pool, &design.unit, batch)?, Vec::new()),
            Strategy::SeqSOpt => {
                let basis = model.indices();
                (s_optimal_select(pool, &basis, batch, &design.standard)?, basis)
            }
            Strategy::SeqDOpt => {
                let basis = if config.sparse_d_basis {
                    model.indices()
                } else {
                    build_basis(m, model.degree(), model.truncation.q)?.indices().to_vec()
                };
                let options = FedorovOptions {
                    seed: config.fedorov.seed.wrapping_add(iteration as u64),
                    ..config.fedorov
                };
                (
                    d_optimal_select(pool, &basis, batch, &design.standard, &options)?,
                    basis,
                )
            }
        };
        pool.mark_used(&selection.rows)?;
        let unit = pool.unit().select_rows(&selection.rows);
        let standard = pool.standard().select_rows(&selection.rows);
        let physical = input.unit_to_physical(&unit)?;
        let y = evaluate_rows(oracle, &physical)?;
        design.append(&unit, &standard, &physical, &y, iteration);
        record.enrichments.push(EnrichmentStep {
            iteration,
            added: selection.rows,
            basis,
            criterion: selection.criterion,
        });
    }
}
