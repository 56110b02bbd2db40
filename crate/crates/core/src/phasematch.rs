//! Pump envelope, phase-matching functions and the two-photon momentum
//! amplitude `V(q_s + q_i) * Phi(q_s, q_i)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{ParaxialGuard, SellmeierModel, TransverseMomentum, TypeIKinematics};
use crate::error::{Error, Result};

/// `sin(x) / x`, with the removable singularity handled by its series.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CrystalKind {
    Single {
        length: f64,
    },
    /// Two identical crystals of `length` separated by `gap`. Phases are
    /// referenced to the midpoint between them.
    Double {
        length: f64,
        gap: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalSetup {
    pub kind: CrystalKind,
    pub theta_p: f64,
}

impl CrystalSetup {
    pub fn single(length: f64, theta_p: f64) -> Self {
        Self {
            kind: CrystalKind::Single { length },
            theta_p,
        }
    }

    pub fn double(length: f64, gap: f64, theta_p: f64) -> Self {
        Self {
            kind: CrystalKind::Double { length, gap },
            theta_p,
        }
    }

    /// Length of one crystal.
    pub fn length(&self) -> f64 {
        match self.kind {
            CrystalKind::Single { length } | CrystalKind::Double { length, .. } => length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (length, gap) = match self.kind {
            CrystalKind::Single { length } => (length, 0.0),
            CrystalKind::Double { length, gap } => (length, gap),
        };
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!(
                "crystal length must be positive, got {length} m"
            )));
        }
        if !(gap >= 0.0 && gap.is_finite()) {
            return Err(Error::Config(format!(
                "crystal gap must be non-negative, got {gap} m"
            )));
        }
        if !(self.theta_p > 0.0 && self.theta_p < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "phase-matching angle must lie in (0, 90) deg, got {} deg",
                self.theta_p.to_degrees()
            )));
        }
        Ok(())
    }

    /// Phase-matching function for a given mismatch.
    #[inline]
    pub fn phi(&self, delta_kz: f64) -> Complex64 {
        match self.kind {
            CrystalKind::Single { length } => phi_single(delta_kz, length),
            CrystalKind::Double { length, gap } => phi_double(delta_kz, length, gap),
        }
    }
}

/// Single crystal: `sinc(dk L / 2) exp(i dk L / 2)`.
#[inline]
pub fn phi_single(delta_kz: f64, length: f64) -> Complex64 {
    let half = 0.5 * delta_kz * length;
    let (s, c) = half.sin_cos();
    sinc(half) * Complex64::new(c, s)
}

/// Two crystals: `sinc(dk L / 2) cos(dk (L + d) / 2)`. Purely real.
#[inline]
pub fn phi_double(delta_kz: f64, length: f64, gap: f64) -> Complex64 {
    Complex64::new(
        sinc(0.5 * delta_kz * length) * (0.5 * delta_kz * (length + gap)).cos(),
        0.0,
    )
}

/// Gaussian pump with unit peak amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub lambda_p: f64,
    /// Beam waist `w0` (m).
    pub waist: f64,
}

impl PumpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            return Err(Error::Config(format!(
                "beam waist must be positive, got {} m",
                self.waist
            )));
        }
        if !(self.lambda_p > 0.0) {
            return Err(Error::Config("pump wavelength must be positive".into()));
        }
        Ok(())
    }

    /// `V(q_p) = exp(-|q_p|^2 w0^2 / 4)`.
    #[inline]
    pub fn envelope(&self, q_p: TransverseMomentum) -> Complex64 {
        Complex64::new(self.envelope_sqr_arg(q_p.norm_sqr()), 0.0)
    }

    #[inline]
    pub(crate) fn envelope_sqr_arg(&self, q_p_sqr: f64) -> f64 {
        (-0.25 * q_p_sqr * self.waist * self.waist).exp()
    }
}

pub fn pump_envelope(q_p: TransverseMomentum, pump: &PumpSpec) -> Complex64 {
    pump.envelope(q_p)
}

/// A validated down-conversion source: crystal model, pump and geometry.
#[derive(Debug, Clone)]
pub struct SpdcSource {
    pump: PumpSpec,
    setup: CrystalSetup,
    kinematics: TypeIKinematics,
}

impl SpdcSource {
    pub fn new(model: &SellmeierModel, pump: PumpSpec, setup: CrystalSetup) -> Result<Self> {
        Self::with_guard(model, pump, setup, ParaxialGuard::default())
    }

    pub fn with_guard(
        model: &SellmeierModel,
        pump: PumpSpec,
        setup: CrystalSetup,
        guard: ParaxialGuard,
    ) -> Result<Self> {
        pump.validate()?;
        setup.validate()?;
        let kinematics = TypeIKinematics::with_guard(model, pump.lambda_p, setup.theta_p, guard)?;
        Ok(Self {
            pump,
            setup,
            kinematics,
        })
    }

    pub fn pump(&self) -> &PumpSpec {
        &self.pump
    }

    pub fn setup(&self) -> &CrystalSetup {
        &self.setup
    }

    pub fn kinematics(&self) -> &TypeIKinematics {
        &self.kinematics
    }

    pub fn delta_kz(&self, q_s: TransverseMomentum, q_i: TransverseMomentum) -> Result<f64> {
        self.kinematics.delta_kz(q_s, q_i)
    }

    pub fn phi(&self, q_s: TransverseMomentum, q_i: TransverseMomentum) -> Result<Complex64> {
        Ok(self.setup.phi(self.delta_kz(q_s, q_i)?))
    }

    /// Unnormalized two-photon amplitude at one momentum pair.
    pub fn momentum_amplitude(&self, q_s: TransverseMomentum, q_i: TransverseMomentum) -> Result<Complex64> {
        Ok(self.pump.envelope(q_s + q_i) * self.phi(q_s, q_i)?)
    }

    /// Same as [`momentum_amplitude`](Self::momentum_amplitude) from raw
    /// components and without the paraxial guard; for grid evaluation.
    #[inline]
    pub fn amplitude_raw(&self, qsx: f64, qsy: f64, qix: f64, qiy: f64) -> Complex64 {
        let qpx = qsx + qix;
        let qpy = qsy + qiy;
        let v = self.pump.envelope_sqr_arg(qpx * qpx + qpy * qpy);
        if v == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        v * self.setup.phi(self.kinematics.delta_kz_raw(qsx, qsy, qix, qiy))
    }
}
