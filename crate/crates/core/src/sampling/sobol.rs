use nalgebra::DMatrix;

use super::sobol_table::DIRECTION_TABLE;
use crate::error::{Error, Result};

const BITS: usize = 32;

/// Highest supported dimension.
pub const SOBOL_MAX_DIM: usize = DIRECTION_TABLE.len() + 1;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = DIRECTION_TABLE[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                v[k] ^= v[k - l];
            }
        }
    }
    v
}

/// Base-2 Sobol' sequence in Gray-code order.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > SOBOL_MAX_DIM {
            return Err(Error::Dimension {
                expected: SOBOL_MAX_DIM,
                actual: dim,
            });
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Positions the generator so that the next point has index `index >= 1`.
    pub fn seek(&mut self, index: u64) {
        let prev = index.max(1) - 1;
        let gray = prev ^ (prev >> 1);
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x = (0..BITS).filter(|&b| (gray >> b) & 1 == 1).fold(0, |acc, b| acc ^ v[b]);
        }
        self.index = prev;
    }

    /// Writes the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        self.index += 1;
        let c = self.index.trailing_zeros() as usize;
        for ((x, v), o) in self.state.iter_mut().zip(&self.directions).zip(out.iter_mut()) {
            *x ^= v[c];
            *o = *x as f64 / (1u64 << BITS) as f64;
        }
    }
}

/// `n` Sobol' points `offset + 1 ..= offset + n` (the all-zero point 0 is never emitted).
pub fn sobol_points(n: usize, dim: usize, offset: u64) -> Result<DMatrix<f64>> {
    if offset.checked_add(n as u64).is_none_or(|l| l >= 1u64 << BITS) {
        return Err(Error::InvalidArgument(format!("Sobol' index range exceeds 2^{BITS}")));
    }
    let mut gen = Sobol::new(dim)?;
    gen.seek(offset + 1);
    let mut out = DMatrix::zeros(n, dim);
    let mut row = vec![0.0; dim];
    for i in 0..n {
        gen.next_into(&mut row);
        for (k, &v) in row.iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}
