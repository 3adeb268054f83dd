//! Independent-marginal input models and the isoprobabilistic map to the
//! standard space in which the polynomial basis is orthonormal.
//!
//! Three coordinate systems are used throughout the crate:
//!
//! * **unit**: the hypercube `[0,1)^M` produced by every sampler,
//! * **standard**: `U(-1,1)` (Legendre) or `N(0,1)` (Hermite) per coordinate,
//! * **physical**: the natural units of the model inputs.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Distribution family of a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Uniform,
    Gaussian,
    Lognormal,
    Gumbel,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Gaussian => "gaussian",
            Family::Lognormal => "lognormal",
            Family::Gumbel => "gumbel",
        }
    }
}

/// Univariate distribution with parameters in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Marginal {
    Uniform {
        lower: f64,
        upper: f64,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    Lognormal {
        mu_ln: f64,
        sigma_ln: f64,
    },
    /// Maximum Gumbel, `F(x) = exp(-exp(-(x - mu) / beta))`.
    Gumbel {
        mu: f64,
        beta: f64,
    },
}

fn param_error(family: Family, reason: impl Into<String>) -> Error {
    Error::Parameterization {
        family: family.name().to_string(),
        reason: reason.into(),
    }
}

impl Marginal {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::Uniform { lower, upper }.validated()
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::Gaussian { mean, std }.validated()
    }

    pub fn lognormal(mu_ln: f64, sigma_ln: f64) -> Result<Self> {
        Self::Lognormal { mu_ln, sigma_ln }.validated()
    }

    pub fn gumbel(mu: f64, beta: f64) -> Result<Self> {
        Self::Gumbel { mu, beta }.validated()
    }

    /// Checks the parameter invariants of the family.
    pub fn validated(self) -> Result<Self> {
        let finite = |v: f64| v.is_finite();
        match self {
            Marginal::Uniform { lower, upper } => {
                if !(finite(lower) && finite(upper) && lower < upper) {
                    return Err(param_error(Family::Uniform, "requires finite lower < upper"));
                }
            }
            Marginal::Gaussian { mean, std } => {
                if !(finite(mean) && finite(std) && std > 0.0) {
                    return Err(param_error(Family::Gaussian, "requires std > 0"));
                }
            }
            Marginal::Lognormal { mu_ln, sigma_ln } => {
                if !(finite(mu_ln) && finite(sigma_ln) && sigma_ln > 0.0) {
                    return Err(param_error(Family::Lognormal, "requires sigma_ln > 0"));
                }
            }
            Marginal::Gumbel { mu, beta } => {
                if !(finite(mu) && finite(beta) && beta > 0.0) {
                    return Err(param_error(Family::Gumbel, "requires beta > 0"));
                }
            }
        }
        Ok(self)
    }

    pub fn family(&self) -> Family {
        match self {
            Marginal::Uniform { .. } => Family::Uniform,
            Marginal::Gaussian { .. } => Family::Gaussian,
            Marginal::Lognormal { .. } => Family::Lognormal,
            Marginal::Gumbel { .. } => Family::Gumbel,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Lognormal { mu_ln, sigma_ln } => (mu_ln + 0.5 * sigma_ln * sigma_ln).exp(),
            Marginal::Gumbel { mu, beta } => mu + EULER_GAMMA * beta,
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Marginal::Gaussian { std, .. } => std,
            Marginal::Lognormal { mu_ln, sigma_ln } => {
                let s2 = sigma_ln * sigma_ln;
                (s2.exp_m1() * (2.0 * mu_ln + s2).exp()).sqrt()
            }
            Marginal::Gumbel { beta, .. } => beta * PI / 6f64.sqrt(),
        }
    }

    /// Closed support `(lower, upper)`; infinite bounds where unbounded.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lower, upper } => (lower, upper),
            Marginal::Lognormal { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Marginal::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
            }
            Marginal::Lognormal { mu_ln, sigma_ln } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu_ln) / sigma_ln;
                (-0.5 * z * z).exp() / (x * sigma_ln * (2.0 * PI).sqrt())
            }
            Marginal::Gumbel { mu, beta } => {
                let z = (x - mu) / beta;
                (-z - (-z).exp()).exp() / beta
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Marginal::Gaussian { mean, std } => std_normal_cdf((x - mean) / std),
            Marginal::Lognormal { mu_ln, sigma_ln } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu_ln) / sigma_ln)
                }
            }
            Marginal::Gumbel { mu, beta } => (-(-(x - mu) / beta).exp()).exp(),
        }
    }

    /// Inverse CDF for `p` in `(0,1)`.
    pub fn inv_cdf(&self, p: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => lower + p * (upper - lower),
            Marginal::Gaussian { mean, std } => mean + std * std_normal_inv_cdf(p),
            Marginal::Lognormal { mu_ln, sigma_ln } => (mu_ln + sigma_ln * std_normal_inv_cdf(p)).exp(),
            Marginal::Gumbel { mu, beta } => mu - beta * (-p.ln()).ln(),
        }
    }

    /// Polynomial family of the standard space this marginal maps to.
    pub fn poly_family(&self, uniform_space: UniformSpace) -> PolyFamily {
        match self {
            Marginal::Uniform { .. } => match uniform_space {
                UniformSpace::Symmetric => PolyFamily::Legendre,
                UniformSpace::Unit => PolyFamily::ShiftedLegendre,
            },
            _ => PolyFamily::Hermite,
        }
    }

    /// Moment-matched parameters from a mean and coefficient of variation.
    pub fn from_moments(family: Family, mean: f64, cov: f64) -> Result<Self> {
        moments_to_params(family, mean, cov)
    }
}

/// Builds a marginal whose mean and standard deviation `|mean|·cov` match
/// the given moments exactly.
pub fn moments_to_params(family: Family, mean: f64, cov: f64) -> Result<Marginal> {
    if !(cov > 0.0 && cov.is_finite()) {
        return Err(param_error(family, "coefficient of variation must be positive"));
    }
    if mean == 0.0 || !mean.is_finite() {
        return Err(param_error(
            family,
            "a CoV parameterization needs a finite non-zero mean",
        ));
    }
    let std = mean.abs() * cov;
    match family {
        Family::Uniform => {
            let half = std * 3f64.sqrt();
            Marginal::uniform(mean - half, mean + half)
        }
        Family::Gaussian => Marginal::gaussian(mean, std),
        Family::Lognormal => {
            if mean <= 0.0 {
                return Err(param_error(family, "lognormal mean must be positive"));
            }
            let sigma_ln = (cov * cov).ln_1p().sqrt();
            let mu_ln = mean.ln() - 0.5 * sigma_ln * sigma_ln;
            Marginal::lognormal(mu_ln, sigma_ln)
        }
        Family::Gumbel => {
            let beta = std * 6f64.sqrt() / PI;
            Marginal::gumbel(mean - EULER_GAMMA * beta, beta)
        }
    }
}

/// Marginal declaration as it appears in configuration files: either
/// explicit parameters or `{"family": ..., "mean": ..., "cov": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalSpec {
    Moments { family: Family, mean: f64, cov: f64 },
    Params(Marginal),
}

impl MarginalSpec {
    pub fn resolve(&self) -> Result<Marginal> {
        match *self {
            MarginalSpec::Moments { family, mean, cov } => moments_to_params(family, mean, cov),
            MarginalSpec::Params(m) => m.validated(),
        }
    }
}

/// Standard-space convention for uniform marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformSpace {
    /// `U(-1,1)` with Legendre polynomials.
    #[default]
    Symmetric,
    /// `U(0,1)` with shifted Legendre polynomials.
    Unit,
}

/// Ordered list of independent marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputModel {
    marginals: Vec<Marginal>,
    #[serde(default)]
    uniform_space: UniformSpace,
}

/// Direction of [`isoprobabilistic_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToStandard,
    ToPhysical,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidArgument("input model needs at least one marginal".into()));
        }
        let marginals = marginals
            .into_iter()
            .map(Marginal::validated)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            marginals,
            uniform_space: UniformSpace::default(),
        })
    }

    pub fn iid(marginal: Marginal, dim: usize) -> Result<Self> {
        Self::new(vec![marginal; dim])
    }

    pub fn with_uniform_space(mut self, space: UniformSpace) -> Self {
        self.uniform_space = space;
        self
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn uniform_space(&self) -> UniformSpace {
        self.uniform_space
    }

    pub fn poly_families(&self) -> Vec<PolyFamily> {
        self.marginals
            .iter()
            .map(|m| m.poly_family(self.uniform_space))
            .collect()
    }

    fn check_dim(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Maps one physical coordinate to the standard space.
    pub fn coordinate_to_standard(&self, k: usize, x: f64) -> Result<f64> {
        let m = &self.marginals[k];
        let domain = |reason: &str| Error::Domain {
            coordinate: k,
            value: x,
            reason: reason.to_string(),
        };
        if !x.is_finite() {
            return Err(domain("non-finite value"));
        }
        let xi = match *m {
            Marginal::Uniform { lower, upper } => {
                if x < lower || x > upper {
                    return Err(domain("uniform support"));
                }
                let t = (x - lower) / (upper - lower);
                match self.uniform_space {
                    UniformSpace::Symmetric => 2.0 * t - 1.0,
                    UniformSpace::Unit => t,
                }
            }
            Marginal::Gaussian { mean, std } => (x - mean) / std,
            Marginal::Lognormal { mu_ln, sigma_ln } => {
                if x <= 0.0 {
                    return Err(domain("lognormal support is x > 0"));
                }
                (x.ln() - mu_ln) / sigma_ln
            }
            Marginal::Gumbel { mu, beta } => {
                let t = (-(x - mu) / beta).exp();
                let p = (-t).exp();
                let xi = if p <= 0.5 {
                    std_normal_inv_cdf(p)
                } else {
                    -std_normal_inv_cdf(-(-t).exp_m1())
                };
                if !xi.is_finite() {
                    return Err(domain("gumbel CDF saturates at this value"));
                }
                xi
            }
        };
        Ok(xi)
    }

    /// Maps one standard coordinate to physical units.
    pub fn coordinate_to_physical(&self, k: usize, xi: f64) -> Result<f64> {
        if !xi.is_finite() {
            return Err(Error::Domain {
                coordinate: k,
                value: xi,
                reason: "non-finite standard value".into(),
            });
        }
        let x = match self.marginals[k] {
            Marginal::Uniform { lower, upper } => {
                let t = match self.uniform_space {
                    UniformSpace::Symmetric => 0.5 * (xi + 1.0),
                    UniformSpace::Unit => xi,
                };
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Domain {
                        coordinate: k,
                        value: xi,
                        reason: "outside the standard uniform interval".into(),
                    });
                }
                lower + t * (upper - lower)
            }
            Marginal::Gaussian { mean, std } => mean + std * xi,
            Marginal::Lognormal { mu_ln, sigma_ln } => (mu_ln + sigma_ln * xi).exp(),
            Marginal::Gumbel { mu, beta } => {
                // -ln F evaluated on the accurate side of the normal CDF
                let neg_log_p = if xi <= 0.0 {
                    -std_normal_cdf(xi).ln()
                } else {
                    -(-std_normal_cdf(-xi)).ln_1p()
                };
                mu - beta * neg_log_p.ln()
            }
        };
        Ok(x)
    }

    /// Maps a unit-hypercube coordinate in `(0,1)` to the standard space.
    pub fn unit_to_standard_coordinate(&self, k: usize, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain {
                coordinate: k,
                value: u,
                reason: "unit coordinate outside [0,1]".into(),
            });
        }
        let xi = match self.marginals[k].poly_family(self.uniform_space) {
            PolyFamily::Legendre => 2.0 * u - 1.0,
            PolyFamily::ShiftedLegendre => u,
            PolyFamily::Hermite => {
                if u <= 0.0 || u >= 1.0 {
                    return Err(Error::Domain {
                        coordinate: k,
                        value: u,
                        reason: "normal quantile of 0 or 1 is infinite".into(),
                    });
                }
                std_normal_inv_cdf(u)
            }
        };
        Ok(xi)
    }

    /// Inverse of [`Self::unit_to_standard_coordinate`].
    pub fn standard_to_unit_coordinate(&self, k: usize, xi: f64) -> f64 {
        match self.marginals[k].poly_family(self.uniform_space) {
            PolyFamily::Legendre => 0.5 * (xi + 1.0),
            PolyFamily::ShiftedLegendre => xi,
            PolyFamily::Hermite => std_normal_cdf(xi),
        }
    }

    pub fn unit_to_standard(&self, unit: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(unit.ncols())?;
        map_matrix(unit, |k, u| self.unit_to_standard_coordinate(k, u))
    }

    pub fn standard_to_unit(&self, standard: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(standard.ncols())?;
        map_matrix(standard, |k, xi| Ok(self.standard_to_unit_coordinate(k, xi)))
    }

    pub fn unit_to_physical(&self, unit: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let standard = self.unit_to_standard(unit)?;
        isoprobabilistic_transform(self, &standard, Direction::ToPhysical)
    }
}

fn map_matrix(m: &DMatrix<f64>, f: impl Fn(usize, f64) -> Result<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(i, k)] = f(k, m[(i, k)])?;
        }
    }
    Ok(out)
}

/// Componentwise map between physical and standard coordinates (rows are points).
pub fn isoprobabilistic_transform(
    model: &InputModel,
    points: &DMatrix<f64>,
    direction: Direction,
) -> Result<DMatrix<f64>> {
    model.check_dim(points.ncols())?;
    match direction {
        Direction::ToStandard => map_matrix(points, |k, x| model.coordinate_to_standard(k, x)),
        Direction::ToPhysical => map_matrix(points, |k, xi| model.coordinate_to_physical(k, xi)),
    }
}

/// Draws `n` iid points from the joint distribution (rows are points, physical units).
pub fn sample_joint(model: &InputModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.dim();
    let mut unit = DMatrix::zeros(n, m);
    for i in 0..n {
        for k in 0..m {
            unit[(i, k)] = rng.sample::<f64, _>(Open01);
        }
    }
    model.unit_to_physical(&unit)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
pub fn std_normal_inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // lower tail, exact since 1 - p is exact for p >= 0.5
    let (q, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut z = -SQRT_2 * erfc_inv(2.0 * q);
    if z.is_finite() {
        // one Halley step against the CDF
        let u = (std_normal_cdf(z) - q) * (2.0 * PI).sqrt() * (0.5 * z * z).exp();
        z -= u / (1.0 + 0.5 * z * u);
    }
    sign * z
}

/// Inverts a monotone CDF on `[lo, hi]` by bisection to an absolute
/// tolerance of `1e-14` (relative for large magnitudes).
pub fn invert_cdf_bisect(cdf: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Univariate orthonormal polynomial family of a standard coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyFamily {
    /// Orthonormal w.r.t. `U(-1,1)`.
    Legendre,
    /// Orthonormal w.r.t. `U(0,1)`.
    ShiftedLegendre,
    /// Orthonormal probabilists' Hermite, w.r.t. `N(0,1)`.
    Hermite,
}

const TABLE_DEGREE: usize = 128;

struct Recurrence {
    // psi_{n+1} = a[n] * x * psi_n - b[n] * psi_{n-1}
    a: Vec<f64>,
    b: Vec<f64>,
}

fn legendre_coefficients(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let a = ((2.0 * nf + 1.0) * (2.0 * nf + 3.0)).sqrt() / (nf + 1.0);
    let b = if n == 0 {
        0.0
    } else {
        nf / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf - 1.0)).sqrt()
    };
    (a, b)
}

fn hermite_coefficients(n: usize) -> (f64, f64) {
    let nf = n as f64;
    (1.0 / (nf + 1.0).sqrt(), (nf / (nf + 1.0)).sqrt())
}

fn recurrence(family: PolyFamily) -> &'static Recurrence {
    static LEGENDRE: OnceLock<Recurrence> = OnceLock::new();
    static HERMITE: OnceLock<Recurrence> = OnceLock::new();
    let build = |f: fn(usize) -> (f64, f64)| {
        let (a, b) = (0..TABLE_DEGREE).map(f).unzip();
        Recurrence { a, b }
    };
    match family {
        PolyFamily::Legendre | PolyFamily::ShiftedLegendre => LEGENDRE.get_or_init(|| build(legendre_coefficients)),
        PolyFamily::Hermite => HERMITE.get_or_init(|| build(hermite_coefficients)),
    }
}

impl PolyFamily {
    fn coefficients(self, n: usize) -> (f64, f64) {
        if n < TABLE_DEGREE {
            let r = recurrence(self);
            (r.a[n], r.b[n])
        } else {
            match self {
                PolyFamily::Hermite => hermite_coefficients(n),
                _ => legendre_coefficients(n),
            }
        }
    }

    /// Writes `psi_0(x) ..= psi_{out.len()-1}(x)` into `out`.
    pub fn eval_all(self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let x = match self {
            PolyFamily::ShiftedLegendre => 2.0 * x - 1.0,
            _ => x,
        };
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        let (a0, _) = self.coefficients(0);
        out[1] = a0 * x;
        for n in 1..out.len() - 1 {
            let (a, b) = self.coefficients(n);
            out[n + 1] = a * x * out[n] - b * out[n - 1];
        }
    }

    pub fn eval(self, degree: usize, x: f64) -> f64 {
        let mut buf = vec![0.0; degree + 1];
        self.eval_all(x, &mut buf);
        buf[degree]
    }
}

/// Value of the orthonormal polynomial of the given degree.
pub fn eval_orthonormal_poly(family: PolyFamily, degree: usize, x: f64) -> f64 {
    family.eval(degree, x)
}
