//! Polynomial chaos bases, regression and error estimators.

pub mod adaptive;
pub mod basis;
pub mod lar;
pub mod matrix;
pub mod model;
pub mod ols;

pub use adaptive::{degree_adaptive_fit, PceConfig};
pub use basis::{build_basis, MultiIndex, MultiIndexSet, Truncation};
pub use lar::{hybrid_lar_fit, hybrid_lar_matrix, lar_path, LarPath, LarStep};
pub use matrix::{eval_model_matrix, ModelMatrix, UnivariateTable};
pub use model::{mse_rmse, pce_predict, prediction_errors, PceTerm, SparsePce};
pub use ols::{hat_diagonal, loo_error, ols_fit, ols_with_loo};
