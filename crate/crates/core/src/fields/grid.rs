use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasematch::SpdcSource;

/// Centered one-axis sampling `q_n = (n - N/2) dq`, `n = 0..N`.
///
/// The conjugate position grid is `x_m = (m - N/2) dx` with `dx dq = 2 pi / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub n: usize,
    pub dq: f64,
}

impl LineGrid {
    pub fn new(n: usize, dq: f64) -> Result<Self> {
        let grid = Self { n, dq };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 8, got {}",
                self.n
            )));
        }
        if !(self.dq > 0.0 && self.dq.is_finite()) {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {}",
                self.dq
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn q(&self, idx: usize) -> f64 {
        (idx as f64 - (self.n / 2) as f64) * self.dq
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dq)
    }

    #[inline]
    pub fn x(&self, idx: usize) -> f64 {
        (idx as f64 - (self.n / 2) as f64) * self.dx()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.q(i)).collect()
    }

    /// Index of the node nearest to `x` on the position grid.
    pub fn nearest_position_index(&self, x: f64) -> Option<usize> {
        let idx = (x / self.dx()).round() + (self.n / 2) as f64;
        (idx >= 0.0 && idx < self.n as f64).then_some(idx as usize)
    }
}

/// Identical sampling on all four axes `(q_sx, q_sy, q_ix, q_iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid4 {
    pub axis: LineGrid,
}

impl MomentumGrid4 {
    pub fn new(n: usize, dq: f64) -> Result<Self> {
        Ok(Self {
            axis: LineGrid::new(n, dq)?,
        })
    }

    /// Grid with `dq = 2 q_max / n` for the extent chosen by `policy`.
    pub fn auto(n: usize, source: &SpdcSource, policy: &ExtentPolicy) -> Result<Self> {
        let q_max = policy.q_max(source);
        Self::new(n, 2.0 * q_max / n as f64)
    }

    pub fn n(&self) -> usize {
        self.axis.n
    }

    pub fn dq(&self) -> f64 {
        self.axis.dq
    }

    pub fn dx(&self) -> f64 {
        self.axis.dx()
    }

    pub fn len(&self) -> usize {
        self.n().pow(4)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Momentum half-extent `q_max = c1 / w0 + c2 * sqrt(4 pi k_s / L)`: a pump
/// term plus a multiple of the phase-matching ring scale of one crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtentPolicy {
    pub c1: f64,
    pub c2: f64,
}

impl Default for ExtentPolicy {
    fn default() -> Self {
        Self { c1: 6.0, c2: 1.5 }
    }
}

impl ExtentPolicy {
    pub fn q_max(&self, source: &SpdcSource) -> f64 {
        let k_s = source.kinematics().signal_wavenumber();
        let length = source.setup().length();
        // L * lambda_s / (2 pi n_so) == L / k_s
        self.c1 / source.pump().waist + self.c2 * (4.0 * PI * k_s / length).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(LineGrid::new(6, 1.0).is_err());
        assert!(LineGrid::new(12, 1.0).is_err());
        assert!(LineGrid::new(16, 0.0).is_err());
        let g = LineGrid::new(16, 2.5e3).unwrap();
        assert_eq!(g.q(8), 0.0);
        assert_eq!(g.q(0), -8.0 * 2.5e3);
        assert!((g.dx() * g.dq - 2.0 * PI / 16.0).abs() < 1e-15);
        assert_eq!(g.nearest_position_index(0.0), Some(8));
        assert_eq!(g.nearest_position_index(0.6 * g.dx()), Some(9));
        assert_eq!(g.nearest_position_index(1.0), None);
    }
}
