use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;
pub const SOBOL_G_A: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 500.0];

pub fn ishigami(x: &[f64]) -> f64 {
    ishigami_with(x, ISHIGAMI_A, ISHIGAMI_B)
}

pub fn ishigami_with(x: &[f64], a: f64, b: f64) -> f64 {
    let s2 = x[1].sin();
    x[0].sin() * (1.0 + b * x[2].powi(4)) + a * s2 * s2
}

/// Variance under independent `U(-pi, pi)` inputs.
pub fn ishigami_variance(a: f64, b: f64) -> f64 {
    a * a / 8.0 + b * PI.powi(4) / 5.0 + b * b * PI.powi(8) / 18.0 + 0.5
}

pub fn sobol_g(x: &[f64], a: &[f64]) -> Result<f64> {
    if x.len() != a.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: x.len(),
        });
    }
    let mut f = 1.0;
    for (k, (&xi, &ai)) in x.iter().zip(a).enumerate() {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain {
                coordinate: k,
                value: xi,
                reason: "g-function inputs live in [0,1]".into(),
            });
        }
        f *= ((4.0 * xi - 2.0).abs() + ai) / (1.0 + ai);
    }
    Ok(f)
}

/// Variance under independent `U(0,1)` inputs.
pub fn sobol_g_variance(a: &[f64]) -> f64 {
    a.iter()
        .map(|ai| 1.0 + 1.0 / (3.0 * (1.0 + ai).powi(2)))
        .product::<f64>()
        - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ishigami_points() {
        assert_eq!(ishigami(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(ishigami(&[PI / 2.0, 0.0, 0.0]), 1.0);
        assert!((ishigami(&[PI / 2.0, PI / 2.0, 1.0]) - 8.1).abs() < 1e-14);
    }

    #[test]
    fn g_function_points() {
        let mid: f64 = SOBOL_G_A.iter().map(|a| a / (1.0 + a)).product();
        assert!((sobol_g(&[0.5; 8], &SOBOL_G_A).unwrap() - mid).abs() < 1e-15);
        assert!((mid - 0.23298).abs() < 1e-5);
        let corner = sobol_g(&[0.0; 8], &SOBOL_G_A).unwrap();
        assert!((corner - 2.7514).abs() < 1e-4);
        assert!(sobol_g(&[1.1; 8], &SOBOL_G_A).is_err());
    }
}
