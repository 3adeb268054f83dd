use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Karhunen-Loeve expansion of a unit-variance Gaussian field with
/// kernel `exp(-|x - x'| / l)` on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlField {
    pub corr_length: f64,
    pub length: f64,
    /// Decreasing eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Frequencies of the eigenfunctions on the centered interval.
    pub frequencies: Vec<f64>,
    norms: Vec<f64>,
}

/// Sign-changing form of the root condition in `t = omega * L / 2`;
/// even modes lie in `(k pi/2, (k+1) pi/2)` for even `k`, odd modes for odd `k`.
fn characteristic(k: usize, ca: f64, t: f64) -> f64 {
    if k % 2 == 0 {
        ca * t.cos() - t * t.sin()
    } else {
        t * t.cos() + ca * t.sin()
    }
}

fn bisect(k: usize, ca: f64) -> Result<f64> {
    let (mut lo, mut hi) = (k as f64 * FRAC_PI_2, (k + 1) as f64 * FRAC_PI_2);
    let mut f_lo = characteristic(k, ca, lo);
    if f_lo * characteristic(k, ca, hi) > 0.0 {
        return Err(Error::Convergence(format!("no sign change in bracket {k}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = characteristic(k, ca, mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expansion with the fewest terms whose variance share reaches `energy_target`.
pub fn kl_build(corr_length: f64, length: f64, energy_target: f64) -> Result<KlField> {
    if !(corr_length > 0.0 && length > 0.0) {
        return Err(Error::InvalidArgument(
            "correlation and domain lengths must be positive".into(),
        ));
    }
    if !(energy_target > 0.0 && energy_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy target {energy_target} is not in (0,1)"
        )));
    }
    let a = 0.5 * length;
    let c = 1.0 / corr_length;
    let mut field = KlField {
        corr_length,
        length,
        eigenvalues: Vec::new(),
        frequencies: Vec::new(),
        norms: Vec::new(),
    };
    let mut captured = 0.0;
    let mut k = 0;
    while captured < energy_target * length {
        if k > 1_000_000 {
            return Err(Error::Convergence("energy target not reached".into()));
        }
        let w = bisect(k, c * a)? / a;
        let lambda = 2.0 * c / (w * w + c * c);
        let s = (2.0 * w * a).sin() / (2.0 * w);
        let norm = if k % 2 == 0 { a + s } else { a - s };
        field.eigenvalues.push(lambda);
        field.frequencies.push(w);
        field.norms.push(norm.sqrt());
        captured += lambda;
        k += 1;
    }
    Ok(field)
}

impl KlField {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Variance share of the retained terms.
    pub fn energy(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.length
    }

    /// Orthonormal eigenfunction `k` at `x` in `[0, L]`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        let y = x - 0.5 * self.length;
        let w = self.frequencies[k];
        let v = if k % 2 == 0 { (w * y).cos() } else { (w * y).sin() };
        v / self.norms[k]
    }

    /// Field realization `sum sqrt(lambda_k) phi_k(x) xi_k`.
    pub fn realize(&self, xi: &[f64], x: f64) -> f64 {
        xi.iter()
            .enumerate()
            .map(|(k, z)| self.eigenvalues[k].sqrt() * self.eigenfunction(k, x) * z)
            .sum()
    }
}
