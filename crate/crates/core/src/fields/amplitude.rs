use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::{transform_all_axes, Direction};
use super::grid::MomentumGrid4;
use crate::error::{Error, Result};
use crate::phasematch::SpdcSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Momentum,
    Position,
}

impl Basis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Basis::Momentum => "momentum",
            Basis::Position => "position",
        }
    }
}

/// Peak working-set multiple of the raw array size during a 4D transform.
pub const WORKING_FACTOR: u64 = 2;

/// Bytes needed to hold and transform an `n^4` complex array.
pub fn memory_estimate(n: usize) -> u64 {
    (n as u64).pow(4) * 16 * WORKING_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOptions {
    /// Largest allowed `|A|^2` on the grid boundary, relative to the peak.
    ///
    /// The sinc tail falls off only algebraically, so boundary values of a
    /// few percent are normal; a grid that cuts through the emission ring
    /// sits near 1.
    pub truncation_limit: f64,
    pub memory_budget: u64,
}

impl Default for AmplitudeOptions {
    fn default() -> Self {
        Self {
            truncation_limit: 0.1,
            memory_budget: 2 << 30,
        }
    }
}

impl AmplitudeOptions {
    pub fn unchecked() -> Self {
        Self {
            truncation_limit: f64::INFINITY,
            memory_budget: u64::MAX,
        }
    }

    fn check_memory(&self, n: usize) -> Result<()> {
        let needed = memory_estimate(n);
        if needed > self.memory_budget {
            return Err(Error::ResourceLimit {
                needed,
                budget: self.memory_budget,
            });
        }
        Ok(())
    }
}

/// Two-photon amplitude sampled on a 4D grid, axes `(s_x, s_y, i_x, i_y)`
/// row-major with the last axis contiguous.
#[derive(Debug, Clone)]
pub struct BiphotonAmplitude4 {
    grid: MomentumGrid4,
    values: Vec<Complex64>,
    basis: Basis,
    /// Propagation distance from the source plane (m).
    z: f64,
    /// In-crystal signal and idler wavenumber used by the Fresnel phase.
    wavenumber: f64,
    options: AmplitudeOptions,
}

/// Samples `V * Phi` on `grid` and normalizes it to unit L2 norm.
pub fn build_amplitude(
    grid: &MomentumGrid4,
    source: &SpdcSource,
    options: AmplitudeOptions,
) -> Result<BiphotonAmplitude4> {
    BiphotonAmplitude4::from_fn(
        grid,
        source.kinematics().signal_wavenumber(),
        options,
        |qsx, qsy, qix, qiy| source.amplitude_raw(qsx, qsy, qix, qiy),
    )
}

fn boundary_max_norm_sqr(values: &[Complex64], n: usize) -> f64 {
    let edge = |i: usize| i == 0 || i == n - 1;
    let mut max = 0.0f64;
    for (idx, v) in values.iter().enumerate() {
        let (a, b, c, d) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
        if edge(a) || edge(b) || edge(c) || edge(d) {
            max = max.max(v.norm_sqr());
        }
    }
    max
}

impl BiphotonAmplitude4 {
    /// Samples `f(q_sx, q_sy, q_ix, q_iy)` on `grid` and normalizes it.
    /// `wavenumber` sets the Fresnel phase used by [`propagate`](Self::propagate).
    pub fn from_fn<F>(grid: &MomentumGrid4, wavenumber: f64, options: AmplitudeOptions, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64, f64) -> Complex64 + Sync,
    {
        options.check_memory(grid.n())?;
        let n = grid.n();
        let q = grid.axis.momenta();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values
            .par_chunks_mut(n * n * n)
            .enumerate()
            .for_each(|(sx, block)| {
                for (j, v) in block.iter_mut().enumerate() {
                    *v = f(q[sx], q[j / (n * n)], q[(j / n) % n], q[j % n]);
                }
            });

        let peak = values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Shape(
                "amplitude vanishes or is not finite on the grid".into(),
            ));
        }
        let boundary = boundary_max_norm_sqr(&values, n);
        if boundary > options.truncation_limit * peak {
            return Err(Error::SupportTruncated {
                ratio: boundary / peak,
                limit: options.truncation_limit,
            });
        }

        let mut amp = Self {
            grid: *grid,
            values,
            basis: Basis::Momentum,
            z: 0.0,
            wavenumber,
            options,
        };
        amp.normalize();
        Ok(amp)
    }

    pub fn grid(&self) -> &MomentumGrid4 {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Width of one bin along any axis in the current basis.
    pub fn bin_width(&self) -> f64 {
        match self.basis {
            Basis::Momentum => self.grid.dq(),
            Basis::Position => self.grid.dx(),
        }
    }

    /// `sum |A|^2 * (bin width)^4`.
    pub fn norm_sqr(&self) -> f64 {
        let vol = self.bin_width().powi(4);
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * vol
    }

    fn normalize(&mut self) {
        let s = 1.0 / self.norm_sqr().sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    fn require(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::Basis {
                expected: basis.as_str(),
                found: self.basis.as_str(),
            });
        }
        Ok(())
    }

    /// Applies the free-space Fresnel phase for a further distance `dz`.
    pub fn propagate(mut self, dz: f64) -> Result<Self> {
        self.require(Basis::Momentum)?;
        let n = self.grid.n();
        let k = self.wavenumber;
        let phase: Vec<Complex64> = (0..n)
            .map(|i| {
                let q = self.grid.axis.q(i);
                Complex64::from_polar(1.0, -q * q * dz / (2.0 * k))
            })
            .collect();
        self.values
            .par_chunks_mut(n * n * n)
            .enumerate()
            .for_each(|(a, block)| {
                for (j, v) in block.iter_mut().enumerate() {
                    let (b, c, d) = (j / (n * n), (j / n) % n, j % n);
                    *v *= phase[a] * phase[b] * phase[c] * phase[d];
                }
            });
        self.z += dz;
        Ok(self)
    }

    /// Unitary 4D transform to the transverse position basis.
    pub fn to_position(mut self) -> Result<Self> {
        self.require(Basis::Momentum)?;
        self.options.check_memory(self.grid.n())?;
        let scale = self.grid.dq() / (2.0 * PI).sqrt();
        transform_all_axes(&mut self.values, self.grid.n(), 4, Direction::Inverse, scale);
        self.basis = Basis::Position;
        Ok(self)
    }

    /// Inverse of [`to_position`](Self::to_position).
    pub fn to_momentum(mut self) -> Result<Self> {
        self.require(Basis::Position)?;
        let scale = self.grid.dx() / (2.0 * PI).sqrt();
        transform_all_axes(&mut self.values, self.grid.n(), 4, Direction::Forward, scale);
        self.basis = Basis::Momentum;
        Ok(self)
    }

    /// Amplitude with signal and idler axes exchanged.
    pub fn swapped(&self) -> Vec<Complex64> {
        let n = self.grid.n();
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let (a, b, c, d) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
            out[((c * n + d) * n + a) * n + b] = *v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::SellmeierModel;
    use crate::fields::grid::ExtentPolicy;
    use crate::phasematch::{CrystalSetup, PumpSpec};

    fn source() -> SpdcSource {
        SpdcSource::new(
            &SellmeierModel::bbo(),
            PumpSpec {
                lambda_p: 355e-9,
                waist: 507e-6,
            },
            CrystalSetup::single(5e-3, 32.9f64.to_radians()),
        )
        .unwrap()
    }

    fn small() -> BiphotonAmplitude4 {
        let src = source();
        let grid = MomentumGrid4::auto(16, &src, &ExtentPolicy::default()).unwrap();
        build_amplitude(&grid, &src, AmplitudeOptions::unchecked()).unwrap()
    }

    #[test]
    fn normalized_and_symmetric() {
        let amp = small();
        assert!((amp.norm_sqr() - 1.0).abs() < 1e-10);
        let swapped = amp.swapped();
        for (a, b) in amp.values().iter().zip(&swapped) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn propagation_is_phase_only_and_additive() {
        let amp = small();
        let same = amp.clone().propagate(0.0).unwrap();
        assert_eq!(same.values(), amp.values());
        let far = amp.clone().propagate(5e-3).unwrap();
        for (a, b) in amp.values().iter().zip(far.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14 * a.norm().max(1.0));
        }
        let two_step = amp.clone().propagate(2e-3).unwrap().propagate(3e-3).unwrap();
        let scale = amp.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in two_step.values().iter().zip(far.values()) {
            assert!((a - b).norm() < 1e-12 * scale);
        }
        assert_eq!(two_step.z(), 5e-3);
    }

    #[test]
    fn parseval_and_round_trip() {
        let amp = small().propagate(5e-3).unwrap();
        let before = amp.values().to_vec();
        let pos = amp.to_position().unwrap();
        assert!((pos.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(pos.clone().propagate(1e-3).is_err());
        let back = pos.to_momentum().unwrap();
        let scale = before.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in before.iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn resource_and_truncation_errors() {
        let src = source();
        let grid = MomentumGrid4::auto(16, &src, &ExtentPolicy::default()).unwrap();
        let tight = AmplitudeOptions {
            truncation_limit: 0.1,
            memory_budget: 1024,
        };
        assert!(matches!(
            build_amplitude(&grid, &src, tight),
            Err(Error::ResourceLimit { .. })
        ));
        // an extent far smaller than the phase-matching ring clips the amplitude
        let narrow = MomentumGrid4::new(16, 1e3).unwrap();
        assert!(matches!(
            build_amplitude(&narrow, &src, AmplitudeOptions::default()),
            Err(Error::SupportTruncated { .. })
        ));
        assert_eq!(memory_estimate(64), 64u64.pow(4) * 32);
    }
}
