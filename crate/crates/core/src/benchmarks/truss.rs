use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::input::{Family, InputModel, Marginal};

/// Bar group sharing a section and modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarGroup {
    Chord,
    Diagonal,
}

/// Plane pin-jointed truss with a pinned left support and a roller on the right.
#[derive(Debug, Clone)]
pub struct Truss {
    /// Node coordinates in meters.
    pub nodes: Vec<[f64; 2]>,
    pub bars: Vec<(usize, usize, BarGroup)>,
    /// Nodes carrying the vertical loads `P1..P6`, in order.
    pub loaded: Vec<usize>,
    pub pinned: usize,
    pub roller: usize,
    /// Node whose downward deflection is reported.
    pub output: usize,
}

impl Truss {
    /// Six 4 m bays, 2 m deep: seven lower-chord nodes, six upper nodes at the
    /// bay centers, 11 chord bars and 12 diagonals.
    pub fn standard() -> Self {
        let mut nodes: Vec<[f64; 2]> = (0..7).map(|i| [4.0 * i as f64, 0.0]).collect();
        nodes.extend((0..6).map(|i| [4.0 * i as f64 + 2.0, 2.0]));
        let mut bars = Vec::new();
        for i in 0..6 {
            bars.push((i, i + 1, BarGroup::Chord));
        }
        for i in 0..5 {
            bars.push((7 + i, 8 + i, BarGroup::Chord));
        }
        for i in 0..6 {
            bars.push((i, 7 + i, BarGroup::Diagonal));
            bars.push((7 + i, i + 1, BarGroup::Diagonal));
        }
        Self {
            nodes,
            bars,
            loaded: (7..13).collect(),
            pinned: 0,
            roller: 6,
            output: 3,
        }
    }

    /// Downward deflection in meters for `[A1, A2, E1, E2, P1..P6]` with
    /// areas in m^2, moduli in MPa and loads in kN.
    pub fn deflection(&self, x: &[f64]) -> Result<f64> {
        let u = self.displacements(x)?;
        Ok(-u[2 * self.output + 1])
    }

    /// Nodal displacements `[u_0, v_0, u_1, ...]` in meters.
    pub fn displacements(&self, x: &[f64]) -> Result<DVector<f64>> {
        let n_loads = self.loaded.len();
        if x.len() != 4 + n_loads {
            return Err(Error::Dimension {
                expected: 4 + n_loads,
                actual: x.len(),
            });
        }
        if x[..4].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Mechanics("sections and moduli must be positive".into()));
        }
        let ea = |g: BarGroup| match g {
            BarGroup::Chord => x[0] * x[2] * 1e6,
            BarGroup::Diagonal => x[1] * x[3] * 1e6,
        };
        let ndof = 2 * self.nodes.len();
        let mut k = DMatrix::zeros(ndof, ndof);
        for &(a, b, g) in &self.bars {
            let dx = self.nodes[b][0] - self.nodes[a][0];
            let dy = self.nodes[b][1] - self.nodes[a][1];
            let len = dx.hypot(dy);
            let (c, s) = (dx / len, dy / len);
            let t = [c, s, -c, -s];
            let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
            let stiff = ea(g) / len;
            for i in 0..4 {
                for j in 0..4 {
                    k[(dofs[i], dofs[j])] += stiff * t[i] * t[j];
                }
            }
        }
        let mut f = DVector::zeros(ndof);
        for (i, &node) in self.loaded.iter().enumerate() {
            f[2 * node + 1] = -x[4 + i] * 1e3;
        }
        let fixed = [2 * self.pinned, 2 * self.pinned + 1, 2 * self.roller + 1];
        let free: Vec<usize> = (0..ndof).filter(|d| !fixed.contains(d)).collect();
        let kf = k.select_rows(&free).select_columns(&free);
        let ff = f.select_rows(&free);
        let chol = kf
            .cholesky()
            .ok_or_else(|| Error::Mechanics("stiffness matrix is singular".into()))?;
        let uf = chol.solve(&ff);
        let mut u = DVector::zeros(ndof);
        for (i, &d) in free.iter().enumerate() {
            u[d] = uf[i];
        }
        Ok(u)
    }
}

/// Deflection of the standard truss.
pub fn truss_deflection(x: &[f64]) -> Result<f64> {
    Truss::standard().deflection(x)
}

/// Lognormal sections and moduli, Gumbel loads.
pub fn truss_input() -> Result<InputModel> {
    let mut marginals = vec![
        Marginal::from_moments(Family::Lognormal, 0.002, 0.10)?,
        Marginal::from_moments(Family::Lognormal, 0.001, 0.10)?,
        Marginal::from_moments(Family::Lognormal, 2.1e5, 0.10)?,
        Marginal::from_moments(Family::Lognormal, 2.1e5, 0.10)?,
    ];
    for _ in 0..6 {
        marginals.push(Marginal::from_moments(Family::Gumbel, 50.0, 0.15)?);
    }
    InputModel::new(marginals)
}
