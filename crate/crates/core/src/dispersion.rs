//! Crystal optics for degenerate type-I down-conversion in a uniaxial crystal.
//!
//! Everything here works in SI units: wavelengths in meters, wavenumbers and
//! transverse momenta in rad/m, angles in radians. The Sellmeier formula is the
//! one exception, it is evaluated in micrometers internally.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BBO_SELLMEIER: &str = include_str!("../data/bbo.sellmeier");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

/// Coefficients of `n^2 = a + b / (lambda^2 - c) - d * lambda^2` (lambda in um).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SellmeierTerms {
    fn index_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a + self.b / (l2 - self.c) - self.d * l2
    }
}

/// Ordinary and extraordinary index model for a uniaxial crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierModel {
    pub name: String,
    pub ordinary: SellmeierTerms,
    pub extraordinary: SellmeierTerms,
    pub valid_min_um: f64,
    pub valid_max_um: f64,
}

impl SellmeierModel {
    /// The embedded beta-barium borate coefficient set.
    pub fn bbo() -> Self {
        BBO_SELLMEIER
            .parse()
            .expect("embedded BBO coefficient file is valid")
    }

    pub fn refractive_index(&self, polarization: Polarization, wavelength: f64) -> Result<f64> {
        let lambda_um = wavelength * 1e6;
        if !(lambda_um >= self.valid_min_um && lambda_um <= self.valid_max_um) {
            return Err(Error::WavelengthOutOfRange {
                model: self.name.clone(),
                wavelength_um: lambda_um,
                min_um: self.valid_min_um,
                max_um: self.valid_max_um,
            });
        }
        let terms = match polarization {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        };
        Ok(terms.index_squared(lambda_um).sqrt())
    }
}

/// Parses the plain-text `key = value` coefficient format.
///
/// Required keys: `name`, `valid_min_um`, `valid_max_um`, and `a`..`d` for
/// both the `o.` and `e.` prefixes. `#` starts a comment. Unknown or repeated
/// keys are rejected.
impl FromStr for SellmeierModel {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut name = None;
        let mut numbers = std::collections::BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::SellmeierParse {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "name" {
                if name.replace(value.to_string()).is_some() {
                    return Err(err("duplicate key `name`".into()));
                }
                continue;
            }
            const KNOWN: [&str; 10] = [
                "valid_min_um",
                "valid_max_um",
                "o.a",
                "o.b",
                "o.c",
                "o.d",
                "e.a",
                "e.b",
                "e.c",
                "e.d",
            ];
            if !KNOWN.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            let number: f64 = value
                .parse()
                .map_err(|_| err(format!("`{value}` is not a number")))?;
            if numbers.insert(key.to_string(), number).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        let get = |key: &str| {
            numbers.get(key).copied().ok_or_else(|| Error::SellmeierParse {
                line: 0,
                reason: format!("missing key `{key}`"),
            })
        };
        let terms = |p: &str| -> Result<SellmeierTerms> {
            Ok(SellmeierTerms {
                a: get(&format!("{p}.a"))?,
                b: get(&format!("{p}.b"))?,
                c: get(&format!("{p}.c"))?,
                d: get(&format!("{p}.d"))?,
            })
        };
        let model = SellmeierModel {
            name: name.unwrap_or_else(|| "unnamed".into()),
            ordinary: terms("o")?,
            extraordinary: terms("e")?,
            valid_min_um: get("valid_min_um")?,
            valid_max_um: get("valid_max_um")?,
        };
        if !(model.valid_min_um > 0.0 && model.valid_min_um < model.valid_max_um) {
            return Err(Error::SellmeierParse {
                line: 0,
                reason: "validity window must satisfy 0 < min < max".into(),
            });
        }
        Ok(model)
    }
}

/// Anisotropy coefficients of the extraordinary pump at a given cut angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpAnisotropy {
    /// Walk-off coefficient.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Effective pump index along the propagation direction.
    pub eta: f64,
}

pub fn pump_coefficients(model: &SellmeierModel, theta_p: f64, lambda_p: f64) -> Result<PumpAnisotropy> {
    if !(0.0..=FRAC_PI_2).contains(&theta_p) {
        return Err(Error::Config(format!(
            "phase-matching angle {theta_p} rad outside [0, pi/2]"
        )));
    }
    let n_o = model.refractive_index(Polarization::Ordinary, lambda_p)?;
    let n_e = model.refractive_index(Polarization::Extraordinary, lambda_p)?;
    Ok(anisotropy_from_indices(n_o, n_e, theta_p))
}

fn anisotropy_from_indices(n_o: f64, n_e: f64, theta: f64) -> PumpAnisotropy {
    let (s, c) = theta.sin_cos();
    let denom = n_o * n_o * s * s + n_e * n_e * c * c;
    let root = denom.sqrt();
    PumpAnisotropy {
        alpha: (n_o * n_o - n_e * n_e) * s * c / denom,
        beta: n_o * n_e / denom,
        gamma: n_o / root,
        eta: n_o * n_e / root,
    }
}

/// Transverse wavevector component pair (rad/m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransverseMomentum {
    pub qx: f64,
    pub qy: f64,
}

impl TransverseMomentum {
    pub const ZERO: Self = Self { qx: 0.0, qy: 0.0 };

    pub fn new(qx: f64, qy: f64) -> Self {
        Self { qx, qy }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl std::ops::Add for TransverseMomentum {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.qx + rhs.qx, self.qy + rhs.qy)
    }
}

impl std::ops::Neg for TransverseMomentum {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.qx, -self.qy)
    }
}

impl fmt::Display for TransverseMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4e}, {:.4e}) rad/m", self.qx, self.qy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParaxialAction {
    Warn,
    Error,
}

/// Boundary of the paraxial expansions, as a maximum `|q| / k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParaxialGuard {
    pub max_ratio: f64,
    pub action: ParaxialAction,
}

impl Default for ParaxialGuard {
    fn default() -> Self {
        Self {
            max_ratio: 0.2,
            action: ParaxialAction::Error,
        }
    }
}

impl ParaxialGuard {
    fn check(&self, q: f64, k: f64) -> Result<()> {
        let ratio = q / k;
        if ratio < self.max_ratio {
            return Ok(());
        }
        match self.action {
            ParaxialAction::Error => Err(Error::Paraxial {
                ratio,
                limit: self.max_ratio,
            }),
            ParaxialAction::Warn => {
                log::warn!("paraxial ratio {ratio:.3} above {}", self.max_ratio);
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalWavevectors {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
}

/// Degenerate type-I kinematics (e -> o + o) at a fixed pump wavelength and
/// cut angle. Signal and idler share the wavelength `2 * lambda_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeIKinematics {
    lambda_p: f64,
    theta_p: f64,
    /// Vacuum pump wavenumber `2 pi / lambda_p`.
    k_p0: f64,
    /// Vacuum signal (= idler) wavenumber.
    k_s0: f64,
    n_so: f64,
    anisotropy: PumpAnisotropy,
    guard: ParaxialGuard,
}

impl TypeIKinematics {
    pub fn new(model: &SellmeierModel, lambda_p: f64, theta_p: f64) -> Result<Self> {
        Self::with_guard(model, lambda_p, theta_p, ParaxialGuard::default())
    }

    pub fn with_guard(
        model: &SellmeierModel,
        lambda_p: f64,
        theta_p: f64,
        guard: ParaxialGuard,
    ) -> Result<Self> {
        let anisotropy = pump_coefficients(model, theta_p, lambda_p)?;
        let lambda_s = 2.0 * lambda_p;
        let n_so = model.refractive_index(Polarization::Ordinary, lambda_s)?;
        Ok(Self {
            lambda_p,
            theta_p,
            k_p0: 2.0 * PI / lambda_p,
            k_s0: 2.0 * PI / lambda_s,
            n_so,
            anisotropy,
            guard,
        })
    }

    pub fn lambda_p(&self) -> f64 {
        self.lambda_p
    }

    pub fn theta_p(&self) -> f64 {
        self.theta_p
    }

    pub fn anisotropy(&self) -> PumpAnisotropy {
        self.anisotropy
    }

    /// Ordinary index at the signal (and idler) wavelength.
    pub fn signal_index(&self) -> f64 {
        self.n_so
    }

    /// In-crystal signal wavenumber `n_so * K_s0`; idler is identical.
    pub fn signal_wavenumber(&self) -> f64 {
        self.n_so * self.k_s0
    }

    /// Pump wavenumber along the propagation axis, `eta_p * K_p0`.
    pub fn pump_wavenumber(&self) -> f64 {
        self.anisotropy.eta * self.k_p0
    }

    pub fn longitudinal_wavevectors(
        &self,
        q_s: TransverseMomentum,
        q_i: TransverseMomentum,
    ) -> Result<LongitudinalWavevectors> {
        let k_s = self.signal_wavenumber();
        self.guard.check(q_s.norm(), k_s)?;
        self.guard.check(q_i.norm(), k_s)?;
        self.guard.check((q_s + q_i).norm(), self.pump_wavenumber())?;
        Ok(self.longitudinal_unchecked(q_s, q_i))
    }

    fn longitudinal_unchecked(
        &self,
        q_s: TransverseMomentum,
        q_i: TransverseMomentum,
    ) -> LongitudinalWavevectors {
        let PumpAnisotropy {
            alpha,
            beta,
            gamma,
            eta,
        } = self.anisotropy;
        let q_p = q_s + q_i;
        let k_p = eta * self.k_p0;
        let k_s = self.signal_wavenumber();
        LongitudinalWavevectors {
            pump: -alpha * q_p.qx + k_p
                - (beta * beta * q_p.qx * q_p.qx + gamma * gamma * q_p.qy * q_p.qy) / (2.0 * k_p),
            signal: k_s - q_s.norm_sqr() / (2.0 * k_s),
            idler: k_s - q_i.norm_sqr() / (2.0 * k_s),
        }
    }

    /// Phase mismatch `k_sz + k_iz - k_pz`, with the paraxial guard applied.
    pub fn delta_kz(&self, q_s: TransverseMomentum, q_i: TransverseMomentum) -> Result<f64> {
        let k = self.longitudinal_wavevectors(q_s, q_i)?;
        Ok(k.signal + k.idler - k.pump)
    }

    /// Phase mismatch from raw components, without the paraxial guard.
    ///
    /// The constant part is folded so that the result stays accurate when the
    /// three wavevectors nearly cancel.
    #[inline]
    pub fn delta_kz_raw(&self, qsx: f64, qsy: f64, qix: f64, qiy: f64) -> f64 {
        let PumpAnisotropy {
            alpha,
            beta,
            gamma,
            eta,
        } = self.anisotropy;
        let k_p = eta * self.k_p0;
        let k_s = self.signal_wavenumber();
        let qpx = qsx + qix;
        let qpy = qsy + qiy;
        let constant = self.collinear_mismatch();
        let transverse = -((qsx * qsx + qsy * qsy) + (qix * qix + qiy * qiy)) / (2.0 * k_s);
        let pump = alpha * qpx + (beta * beta * qpx * qpx + gamma * gamma * qpy * qpy) / (2.0 * k_p);
        constant + transverse + pump
    }

    /// `Delta k_z` at `q_s = q_i = 0`, i.e. `2 n_so K_s0 - eta_p K_p0`.
    pub fn collinear_mismatch(&self) -> f64 {
        2.0 * self.signal_wavenumber() - self.pump_wavenumber()
    }
}

/// Cut angle at which the collinear mismatch vanishes.
///
/// Scans (0, pi/2) for a sign change of the on-axis mismatch and bisects it
/// down to 1e-12 rad.
pub fn collinear_angle(model: &SellmeierModel, lambda_p: f64, lambda_s: f64) -> Result<f64> {
    check_degenerate(lambda_p, lambda_s)?;
    let no_match = || Error::NoCollinearPhaseMatching {
        lambda_p_nm: lambda_p * 1e9,
        lambda_s_nm: lambda_s * 1e9,
    };
    let n_po = model.refractive_index(Polarization::Ordinary, lambda_p)?;
    let n_pe = model.refractive_index(Polarization::Extraordinary, lambda_p)?;
    let n_so = model.refractive_index(Polarization::Ordinary, lambda_s)?;
    let k_p0 = 2.0 * PI / lambda_p;
    let k_s0 = 2.0 * PI / lambda_s;
    let mismatch = |theta: f64| 2.0 * n_so * k_s0 - anisotropy_from_indices(n_po, n_pe, theta).eta * k_p0;

    const STEPS: usize = 900;
    let step = FRAC_PI_2 / STEPS as f64;
    let mut bracket = None;
    let mut prev = mismatch(0.0);
    for i in 1..=STEPS {
        let theta = i as f64 * step;
        let cur = mismatch(theta);
        if prev == 0.0 {
            return Ok(theta - step);
        }
        if prev.signum() != cur.signum() {
            bracket = Some((theta - step, theta));
            break;
        }
        prev = cur;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(no_match)?;
    let mut f_lo = mismatch(lo);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mismatch(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rejects non-degenerate signal wavelengths.
pub fn check_degenerate(lambda_p: f64, lambda_s: f64) -> Result<()> {
    if !(lambda_p > 0.0) || ((lambda_s - 2.0 * lambda_p) / lambda_p).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "only degenerate down-conversion is supported: signal wavelength {:.3} nm must be twice the pump wavelength {:.3} nm",
            lambda_s * 1e9,
            lambda_p * 1e9
        )));
    }
    Ok(())
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quadratic_defect_is_non_positive(q in 0.0f64..3e5, phi in 0.0f64..6.3) {
            let m = SellmeierModel::bbo();
            let theta = collinear_angle(&m, 355e-9, 710e-9).unwrap();
            let kin = TypeIKinematics::new(&m, 355e-9, theta).unwrap();
            let qs = TransverseMomentum::new(q * phi.cos(), q * phi.sin());
            prop_assert!(kin.delta_kz(qs, -qs).unwrap() <= 1e-6);
        }

        #[test]
        fn mismatch_is_continuous_in_theta(t in 0.1f64..1.4, q in -1e5f64..1e5) {
            let m = SellmeierModel::bbo();
            let a = TypeIKinematics::new(&m, 355e-9, t).unwrap();
            let b = TypeIKinematics::new(&m, 355e-9, t + 1e-9).unwrap();
            let da = a.delta_kz_raw(q, 0.0, -0.5 * q, 1e3);
            let db = b.delta_kz_raw(q, 0.0, -0.5 * q, 1e3);
            prop_assert!((da - db).abs() < 1e-1);
        }
    }
}
