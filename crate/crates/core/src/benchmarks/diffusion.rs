use serde::{Deserialize, Serialize};

use super::kl::{kl_build, KlField};
use crate::error::{Error, Result};

/// Condition imposed at `x = L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `u'(L) = F`.
    #[default]
    Gradient,
    /// `E(L) u'(L) = F`.
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub length: f64,
    pub load: f64,
    pub source: f64,
    pub lambda_e: f64,
    pub zeta_e: f64,
    pub corr_length: f64,
    pub energy_target: f64,
    pub elements: usize,
    pub boundary: Boundary,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            length: 1.0,
            load: 1.0,
            source: 0.5,
            lambda_e: 10.0,
            zeta_e: 3.0,
            corr_length: 1.0 / 3.0,
            energy_target: 0.99,
            elements: 200,
            boundary: Boundary::Gradient,
        }
    }
}

/// `-(E u')' + f = 0` on `[0, L]`, `u(0) = 0`, with
/// `E = exp(lambda_E + zeta_E g)` and `g` a truncated KL field. Linear finite
/// elements with the field taken at element midpoints.
#[derive(Debug, Clone)]
pub struct Diffusion1d {
    params: DiffusionParams,
    field: KlField,
    /// `sqrt(lambda_k) phi_k` at element midpoints, row-major by element.
    modes: Vec<f64>,
    /// `sqrt(lambda_k) phi_k(L)`.
    end_modes: Vec<f64>,
}

impl Diffusion1d {
    pub fn new(params: DiffusionParams) -> Result<Self> {
        let field = kl_build(params.corr_length, params.length, params.energy_target)?;
        Self::with_field(params, field)
    }

    pub fn with_field(params: DiffusionParams, field: KlField) -> Result<Self> {
        if params.elements == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one element".into()));
        }
        let m = field.len();
        let h = params.length / params.elements as f64;
        let mut modes = Vec::with_capacity(params.elements * m);
        for e in 0..params.elements {
            let x = (e as f64 + 0.5) * h;
            modes.extend((0..m).map(|k| field.eigenvalues[k].sqrt() * field.eigenfunction(k, x)));
        }
        let end_modes = (0..m)
            .map(|k| field.eigenvalues[k].sqrt() * field.eigenfunction(k, params.length))
            .collect();
        Ok(Self {
            params,
            field,
            modes,
            end_modes,
        })
    }

    pub fn standard() -> Result<Self> {
        Self::new(DiffusionParams::default())
    }

    pub fn dim(&self) -> usize {
        self.field.len()
    }

    pub fn field(&self) -> &KlField {
        &self.field
    }

    pub fn params(&self) -> &DiffusionParams {
        &self.params
    }

    fn coefficient(&self, g: f64) -> f64 {
        (self.params.lambda_e + self.params.zeta_e * g).exp()
    }

    /// Diffusion coefficient at each element midpoint.
    pub fn element_coefficients(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        if xi.len() != m {
            return Err(Error::Dimension {
                expected: m,
                actual: xi.len(),
            });
        }
        let mut out = Vec::with_capacity(self.params.elements);
        for (e, row) in self.modes.chunks(m).enumerate() {
            let g: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            let value = self.coefficient(g);
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonFinite { row: e, column: 0 });
            }
            out.push(value);
        }
        Ok(out)
    }

    /// Nodal solution for the standard-normal KL coordinates `xi`.
    pub fn solve(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let coef = self.element_coefficients(xi)?;
        let p = &self.params;
        let n = p.elements;
        let h = p.length / n as f64;
        let end_flux = match p.boundary {
            Boundary::Flux => p.load,
            Boundary::Gradient => {
                let g: f64 = self.end_modes.iter().zip(xi).map(|(a, b)| a * b).sum();
                self.coefficient(g) * p.load
            }
        };
        // unknowns u_1..u_n; tridiagonal stiffness with lumped source
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for (e, &k) in coef.iter().enumerate() {
            let k = k / h;
            if e > 0 {
                diag[e - 1] += k;
                off[e - 1] = -k;
                rhs[e - 1] -= 0.5 * p.source * h;
            }
            diag[e] += k;
            rhs[e] -= 0.5 * p.source * h;
        }
        rhs[n - 1] += end_flux;
        thomas(&diag, &off, &mut rhs)?;
        let mut u = Vec::with_capacity(n + 1);
        u.push(0.0);
        u.extend(rhs);
        Ok(u)
    }

    /// `u(L)`.
    pub fn response(&self, xi: &[f64]) -> Result<f64> {
        Ok(*self.solve(xi)?.last().expect("mesh has nodes"))
    }
}

/// Symmetric tridiagonal solve in place; `off[i]` couples unknowns `i` and `i + 1`.
fn thomas(diag: &[f64], off: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    for i in 0..n {
        if i > 0 {
            b = diag[i] - off[i - 1] * c[i - 1];
            rhs[i] -= off[i - 1] * rhs[i - 1];
        }
        if b.abs() <= f64::MIN_POSITIVE || !b.is_finite() {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        if i + 1 < n {
            c[i] = off[i] / b;
        }
        rhs[i] /= b;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}
