//! Test models for the design comparison: two analytic functions, a planar
//! truss and a one-dimensional diffusion problem with a lognormal field.

mod analytic;
mod diffusion;
mod kl;
mod truss;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use analytic::{
    ishigami, ishigami_variance, ishigami_with, sobol_g, sobol_g_variance, ISHIGAMI_A, ISHIGAMI_B, SOBOL_G_A,
};
pub use diffusion::{Boundary, Diffusion1d, DiffusionParams};
pub use kl::{kl_build, KlField};
pub use truss::{truss_deflection, truss_input, BarGroup, Truss};

use crate::design::Oracle;
use crate::error::{Error, Result};
use crate::input::{InputModel, Marginal};

type Response = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// Named computational model with its input distribution.
#[derive(Clone)]
pub struct BenchmarkModel {
    pub name: String,
    pub input: InputModel,
    /// Exact response variance when known.
    pub reference_variance: Option<f64>,
    response: Arc<Response>,
}

impl fmt::Debug for BenchmarkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkModel")
            .field("name", &self.name)
            .field("dim", &self.input.dim())
            .finish()
    }
}

impl BenchmarkModel {
    pub fn new(
        name: impl Into<String>,
        input: InputModel,
        reference_variance: Option<f64>,
        response: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            input,
            reference_variance,
            response: Arc::new(response),
        }
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    /// Response at a physical point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        (self.response)(x)
    }

    /// Responses at the rows of `physical`.
    pub fn eval_rows(&self, physical: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut x = vec![0.0; physical.ncols()];
        (0..physical.nrows())
            .map(|i| {
                for (k, v) in x.iter_mut().enumerate() {
                    *v = physical[(i, k)];
                }
                self.eval(&x)
            })
            .collect()
    }
}

impl Oracle for BenchmarkModel {
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, String> {
        self.eval(x).map_err(|e| e.to_string())
    }
}

pub const BENCHMARK_NAMES: [&str; 4] = ["ishigami", "sobol_g", "truss", "diffusion_1d"];

/// Looks a benchmark up by name.
pub fn benchmark(name: &str) -> Result<BenchmarkModel> {
    match name {
        "ishigami" => {
            let u = Marginal::uniform(-std::f64::consts::PI, std::f64::consts::PI)?;
            Ok(BenchmarkModel::new(
                name,
                InputModel::iid(u, 3)?,
                Some(ishigami_variance(ISHIGAMI_A, ISHIGAMI_B)),
                |x| Ok(ishigami(x)),
            ))
        }
        "sobol_g" => Ok(BenchmarkModel::new(
            name,
            InputModel::iid(Marginal::uniform(0.0, 1.0)?, SOBOL_G_A.len())?,
            Some(sobol_g_variance(&SOBOL_G_A)),
            |x| sobol_g(x, &SOBOL_G_A),
        )),
        "truss" => {
            let truss = Truss::standard();
            Ok(BenchmarkModel::new(name, truss_input()?, None, move |x| {
                truss.deflection(x)
            }))
        }
        "diffusion_1d" => {
            let model = Diffusion1d::standard()?;
            let input = InputModel::iid(Marginal::gaussian(0.0, 1.0)?, model.dim())?;
            Ok(BenchmarkModel::new(name, input, None, move |x| model.response(x)))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown benchmark '{other}' (expected one of {})",
            BENCHMARK_NAMES.join(", ")
        ))),
    }
}
