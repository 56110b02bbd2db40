//! Discrete Shannon entropies of binned two-photon joints and the entropic
//! lower bound on entanglement of formation built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::{ParaxialGuard, SellmeierModel};
use crate::error::{Error, Result};
use crate::fields::{
    averaged_joints, Basis, Distribution, ExtentPolicy, LineGrid, PairQuadrature, TransverseAxis,
};
use crate::phasematch::{CrystalKind, CrystalSetup, PumpSpec, SpdcSource};

const NORM_TOL: f64 = 1e-10;
const CONJUGACY_TOL: f64 = 1e-9;

/// `M x M` joint probabilities, `values[s * m + i]` for signal bin `s` and idler bin `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    m: usize,
    values: Vec<f64>,
    basis: Basis,
    bin_width: f64,
}

impl DiscreteJoint {
    pub fn new(m: usize, values: Vec<f64>, basis: Basis, bin_width: f64) -> Result<Self> {
        if m == 0 || values.len() != m * m {
            return Err(Error::Shape(format!(
                "{} values for a {m}x{m} joint",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Shape(
                "joint entries must be finite and non-negative".into(),
            ));
        }
        if !(bin_width > 0.0) {
            return Err(Error::Shape("bin width must be positive".into()));
        }
        Ok(Self {
            m,
            values,
            basis,
            bin_width,
        })
    }

    /// Takes a square 2D distribution as a joint.
    pub fn from_distribution(dist: &Distribution) -> Result<Self> {
        let shape = dist.shape();
        if shape.len() != 2 || shape[0] != shape[1] {
            return Err(Error::Shape(format!(
                "joint needs a square 2D array, got {shape:?}"
            )));
        }
        Self::new(
            shape[0],
            dist.values().to_vec(),
            dist.basis(),
            dist.axes()[0].bin_width,
        )
    }

    /// Uniform over all `M^2` cells.
    pub fn uniform(m: usize, basis: Basis, bin_width: f64) -> Self {
        let p = 1.0 / (m * m) as f64;
        Self::new(m, vec![p; m * m], basis, bin_width).expect("valid uniform joint")
    }

    /// Uniform on the diagonal.
    pub fn diagonal(m: usize, basis: Basis, bin_width: f64) -> Self {
        let mut v = vec![0.0; m * m];
        for i in 0..m {
            v[i * m + i] = 1.0 / m as f64;
        }
        Self::new(m, v, basis, bin_width).expect("valid diagonal joint")
    }

    /// Product `p(s) q(i)`.
    pub fn product(p: &[f64], q: &[f64], basis: Basis, bin_width: f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::Shape("product factors differ in length".into()));
        }
        let values = p.iter().flat_map(|a| q.iter().map(move |b| a * b)).collect();
        Self::new(p.len(), values, basis, bin_width)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn at(&self, s: usize, i: usize) -> f64 {
        self.values[s * self.m + i]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { total });
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::NotNormalized { total });
        }
        self.values.iter_mut().for_each(|v| *v /= total);
        Ok(self)
    }

    pub fn signal_marginal(&self) -> Vec<f64> {
        self.values.chunks(self.m).map(|row| row.iter().sum()).collect()
    }

    pub fn idler_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for row in self.values.chunks(self.m) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Sums `factor x factor` blocks into one bin.
    pub fn box_bin(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.m.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "bin factor {factor} does not divide M = {}",
                self.m
            )));
        }
        let m = self.m / factor;
        let mut out = vec![0.0; m * m];
        for s in 0..self.m {
            for i in 0..self.m {
                out[(s / factor) * m + i / factor] += self.at(s, i);
            }
        }
        Self::new(m, out, self.basis, self.bin_width * factor as f64)
    }

    /// Central `m x m` block at the native bin width, renormalized.
    pub fn crop(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m || !(self.m - m).is_multiple_of(2) {
            return Err(Error::Config(format!("cannot crop M = {} to {m}", self.m)));
        }
        let off = (self.m - m) / 2;
        let mut out = Vec::with_capacity(m * m);
        for s in off..off + m {
            out.extend_from_slice(&self.values[s * self.m + off..s * self.m + off + m]);
        }
        Self::new(m, out, self.basis, self.bin_width)?.normalized()
    }

    /// `(1 - eps) P + eps U`.
    pub fn mix_uniform(&self, eps: f64) -> Self {
        let u = eps / (self.m * self.m) as f64;
        let values = self.values.iter().map(|v| (1.0 - eps) * v + u).collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// Mass within `half_width` bins of the diagonal `s = i`, or of the
    /// centered anti-diagonal `q_s = -q_i` when `anti` is set.
    pub fn band_mass(&self, half_width: usize, anti: bool) -> f64 {
        let m = self.m as isize;
        let hw = half_width as isize;
        let mut mass = 0.0;
        for s in 0..m {
            for i in 0..m {
                let off = if anti { s + i - m } else { s - i };
                if off.abs() <= hw {
                    mass += self.values[(s * m + i) as usize];
                }
            }
        }
        mass
    }
}

fn shannon(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>()
}

/// `H(S, I)` in bits.
pub fn joint_entropy(j: &DiscreteJoint) -> Result<f64> {
    j.check_normalized()?;
    Ok(shannon(j.values.iter().copied()))
}

/// `H(I)` in bits.
pub fn idler_entropy(j: &DiscreteJoint) -> Result<f64> {
    j.check_normalized()?;
    Ok(shannon(j.idler_marginal().into_iter()))
}

/// `H(S)` in bits.
pub fn signal_entropy(j: &DiscreteJoint) -> Result<f64> {
    j.check_normalized()?;
    Ok(shannon(j.signal_marginal().into_iter()))
}

/// `H(S | I) = H(S, I) - H(I)` in bits.
pub fn conditional_entropy(j: &DiscreteJoint) -> Result<f64> {
    Ok(joint_entropy(j)? - idler_entropy(j)?)
}

/// Entropies of one position/momentum joint pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEntropies {
    pub h_pos_joint: f64,
    pub h_pos_idler: f64,
    pub h_pos_conditional: f64,
    pub h_mom_joint: f64,
    pub h_mom_idler: f64,
    pub h_mom_conditional: f64,
}

fn pair_entropies(pos: &DiscreteJoint, mom: &DiscreteJoint) -> Result<PairEntropies> {
    if pos.m != mom.m {
        return Err(Error::Config(format!(
            "position and momentum joints differ in size ({} vs {})",
            pos.m, mom.m
        )));
    }
    if pos.basis != Basis::Position || mom.basis != Basis::Momentum {
        return Err(Error::Config(
            "expected a position joint and a momentum joint".into(),
        ));
    }
    let product = pos.bin_width * mom.bin_width * pos.m as f64 / (2.0 * PI);
    if (product - 1.0).abs() > CONJUGACY_TOL {
        return Err(Error::Config(format!(
            "grids are not conjugate: dx dk M / 2pi = {product}"
        )));
    }
    let (h_pos_joint, h_pos_idler) = (joint_entropy(pos)?, idler_entropy(pos)?);
    let (h_mom_joint, h_mom_idler) = (joint_entropy(mom)?, idler_entropy(mom)?);
    Ok(PairEntropies {
        h_pos_joint,
        h_pos_idler,
        h_pos_conditional: h_pos_joint - h_pos_idler,
        h_mom_joint,
        h_mom_idler,
        h_mom_conditional: h_mom_joint - h_mom_idler,
    })
}

/// Entropies and bound for one evaluation. Entropies are summed over the
/// resolved axes; `ef_min = dimension_bits - H_pos_conditional - H_mom_conditional`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfReport {
    pub h_pos_joint: f64,
    pub h_pos_idler: f64,
    pub h_pos_conditional: f64,
    pub h_mom_joint: f64,
    pub h_mom_idler: f64,
    pub h_mom_conditional: f64,
    /// Bins per party along each resolved axis.
    pub m: usize,
    /// The `log2` dimension term of the bound.
    pub dimension_bits: f64,
    pub ef_min: f64,
    pub axes: Vec<PairEntropies>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl EfReport {
    fn from_pairs(m: usize, dimension_bits: f64, axes: Vec<PairEntropies>) -> Self {
        let sum = |f: fn(&PairEntropies) -> f64| axes.iter().map(f).sum::<f64>();
        let h_pos_conditional = sum(|p| p.h_pos_conditional);
        let h_mom_conditional = sum(|p| p.h_mom_conditional);
        Self {
            h_pos_joint: sum(|p| p.h_pos_joint),
            h_pos_idler: sum(|p| p.h_pos_idler),
            h_pos_conditional,
            h_mom_joint: sum(|p| p.h_mom_joint),
            h_mom_idler: sum(|p| p.h_mom_idler),
            h_mom_conditional,
            m,
            dimension_bits,
            ef_min: dimension_bits - h_pos_conditional - h_mom_conditional,
            axes,
            fingerprint: None,
        }
    }
}

/// `2 log2 M - H(X_s|X_i) - H(K_s|K_i)` for one pair of conjugate joints.
///
/// Each conditional entropy is at most `log2 M`, so this form is never
/// negative; see [`ef_bound`] for the dimension-consistent variant.
pub fn ef_min(pos: &DiscreteJoint, mom: &DiscreteJoint) -> Result<EfReport> {
    let e = pair_entropies(pos, mom)?;
    Ok(EfReport::from_pairs(pos.m, 2.0 * (pos.m as f64).log2(), vec![e]))
}

/// `k log2 M - sum_a [H(X_s|X_i)_a + H(K_s|K_i)_a]` over `k` independently
/// binned transverse axes, each an `M`-outcome conjugate pair.
///
/// The joint conditional entropy of a `M^k` pixel array is at most the sum
/// of the per-axis ones, so this lower-bounds the bound for the full array.
pub fn ef_bound(pairs: &[(DiscreteJoint, DiscreteJoint)]) -> Result<EfReport> {
    let Some(first) = pairs.first() else {
        return Err(Error::Config("no joints given".into()));
    };
    let m = first.0.m;
    let mut axes = Vec::with_capacity(pairs.len());
    for (pos, mom) in pairs {
        if pos.m != m {
            return Err(Error::Config("axes differ in bin count".into()));
        }
        axes.push(pair_entropies(pos, mom)?);
    }
    Ok(EfReport::from_pairs(
        m,
        pairs.len() as f64 * (m as f64).log2(),
        axes,
    ))
}

/// Which axes and dimension term enter the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfForm {
    /// Both transverse axes, `2 log2 M` for the `M x M` pixel plane.
    Plane,
    /// `x` only with dimension term `log2 M`.
    Axis,
    /// `x` only with dimension term `2 log2 M` (never negative).
    AxisLiteral,
}

/// Which basis is box-binned when reducing `M`; the other is cropped to the
/// central bins so the pair stays conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownBin {
    pub factor: usize,
    pub binned: Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntanglementConfig {
    /// Points of the line grid on the resolved axis.
    pub fine_n: usize,
    pub extent: ExtentPolicy,
    pub sum_nodes: usize,
    /// Half-range of the pair-sum momentum in units of `1 / w0`.
    pub sum_extent: f64,
    pub diff_nodes: usize,
    pub down_bin: Option<DownBin>,
    pub form: EfForm,
}

impl Default for EntanglementConfig {
    fn default() -> Self {
        Self {
            fine_n: 256,
            extent: ExtentPolicy::default(),
            sum_nodes: 9,
            sum_extent: 4.0,
            diff_nodes: 64,
            down_bin: None,
            form: EfForm::Plane,
        }
    }
}

impl EntanglementConfig {
    pub fn line_grid(&self, source: &SpdcSource) -> Result<LineGrid> {
        let q_max = self.extent.q_max(source);
        LineGrid::new(self.fine_n, 2.0 * q_max / self.fine_n as f64)
    }

    pub fn quadrature(&self, source: &SpdcSource) -> Result<PairQuadrature> {
        PairQuadrature::pump_relative(
            source.pump().waist,
            self.sum_nodes,
            self.sum_extent,
            self.diff_nodes,
            self.extent.q_max(source),
        )
    }

    /// Bins per party after down-binning.
    pub fn m(&self) -> usize {
        match self.down_bin {
            Some(b) if b.factor > 0 => self.fine_n / b.factor,
            _ => self.fine_n,
        }
    }

    fn reduce(&self, pos: DiscreteJoint, mom: DiscreteJoint) -> Result<(DiscreteJoint, DiscreteJoint)> {
        match self.down_bin {
            None => Ok((pos, mom)),
            Some(DownBin { factor, binned }) => {
                let m = self.fine_n / factor.max(1);
                match binned {
                    Basis::Position => Ok((pos.box_bin(factor)?, mom.crop(m)?)),
                    Basis::Momentum => Ok((pos.crop(m)?, mom.box_bin(factor)?)),
                }
            }
        }
    }
}

/// Conjugate position/momentum joints along `axis`, one pair per distance in `zs`.
pub fn build_axis_joints(
    source: &SpdcSource,
    config: &EntanglementConfig,
    axis: TransverseAxis,
    zs: &[f64],
) -> Result<Vec<(DiscreteJoint, DiscreteJoint)>> {
    let line = config.line_grid(source)?;
    let quad = config.quadrature(source)?;
    let joints = averaged_joints(source, axis, &line, &quad, zs)?;
    let mom = DiscreteJoint::from_distribution(&joints.momentum)?;
    joints
        .positions
        .iter()
        .map(|p| config.reduce(DiscreteJoint::from_distribution(p)?, mom.clone()))
        .collect()
}

/// `x` joints `(position, momentum)` at a single distance.
pub fn build_discrete_joints(
    source: &SpdcSource,
    config: &EntanglementConfig,
    z: f64,
) -> Result<(DiscreteJoint, DiscreteJoint)> {
    Ok(build_axis_joints(source, config, TransverseAxis::X, &[z])?.remove(0))
}

/// Bound at each distance in `zs`; the momentum amplitude is sampled once.
pub fn evaluate_ef(source: &SpdcSource, config: &EntanglementConfig, zs: &[f64]) -> Result<Vec<EfReport>> {
    let x = build_axis_joints(source, config, TransverseAxis::X, zs)?;
    match config.form {
        EfForm::AxisLiteral => x.iter().map(|(p, k)| ef_min(p, k)).collect(),
        EfForm::Axis => x.into_iter().map(|pair| ef_bound(&[pair])).collect(),
        EfForm::Plane => {
            let y = build_axis_joints(source, config, TransverseAxis::Y, zs)?;
            x.into_iter().zip(y).map(|(px, py)| ef_bound(&[px, py])).collect()
        }
    }
}

/// A source configuration and detection distance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SellmeierModel,
    pub pump: PumpSpec,
    pub setup: CrystalSetup,
    pub z: f64,
    pub guard: ParaxialGuard,
}

impl Scenario {
    pub fn source(&self) -> Result<SpdcSource> {
        SpdcSource::with_guard(&self.model, self.pump, self.setup, self.guard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanParameter {
    /// Distance from the crystal (m).
    Z,
    /// Phase-matching angle (rad).
    Theta,
    /// Gap between the two crystals (m).
    D,
}

/// Failure of one scan point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub category: String,
    pub message: String,
}

impl From<Error> for PointError {
    fn from(e: Error) -> Self {
        Self {
            category: e.category().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub value: f64,
    pub outcome: std::result::Result<EfReport, PointError>,
}

/// Evaluates the bound at each value of `parameter`, in input order.
/// A failing point is recorded and the scan continues.
pub fn scan(
    scenario: &Scenario,
    config: &EntanglementConfig,
    parameter: ScanParameter,
    values: &[f64],
) -> Vec<ScanPoint> {
    let point = |value: f64, outcome: Result<EfReport>| ScanPoint {
        value,
        outcome: outcome.map_err(PointError::from),
    };
    match parameter {
        ScanParameter::Z => {
            let bad = values.iter().any(|z| !z.is_finite());
            let shared = if bad {
                Err(Error::Config("propagation distances must be finite".into()))
            } else {
                scenario.source().and_then(|s| evaluate_ef(&s, config, values))
            };
            match shared {
                Ok(reports) => values
                    .iter()
                    .zip(reports)
                    .map(|(&v, r)| point(v, Ok(r)))
                    .collect(),
                Err(e) => {
                    let e = PointError::from(e);
                    values
                        .iter()
                        .map(|&v| ScanPoint {
                            value: v,
                            outcome: Err(e.clone()),
                        })
                        .collect()
                }
            }
        }
        ScanParameter::Theta | ScanParameter::D => values
            .iter()
            .map(|&v| {
                let outcome = vary(scenario, parameter, v).and_then(|s| {
                    let src = s.source()?;
                    Ok(evaluate_ef(&src, config, &[s.z])?.remove(0))
                });
                point(v, outcome)
            })
            .collect(),
    }
}

fn vary(scenario: &Scenario, parameter: ScanParameter, value: f64) -> Result<Scenario> {
    let mut s = scenario.clone();
    match parameter {
        ScanParameter::Z => s.z = value,
        ScanParameter::Theta => s.setup.theta_p = value,
        ScanParameter::D => match &mut s.setup.kind {
            CrystalKind::Double { gap, .. } => *gap = value,
            CrystalKind::Single { .. } => {
                return Err(Error::Config("a gap scan needs the double-crystal setup".into()))
            }
        },
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn pos(j: DiscreteJoint) -> DiscreteJoint {
        DiscreteJoint {
            basis: Basis::Position,
            bin_width: 1.0,
            ..j
        }
    }

    fn mom(j: DiscreteJoint) -> DiscreteJoint {
        let m = j.m;
        DiscreteJoint {
            basis: Basis::Momentum,
            bin_width: 2.0 * PI / m as f64,
            ..j
        }
    }

    #[test]
    fn entropy_identities() {
        for m in [2usize, 4, 16, 64] {
            let lm = (m as f64).log2();
            let u = DiscreteJoint::uniform(m, Basis::Position, 1.0);
            let d = DiscreteJoint::diagonal(m, Basis::Position, 1.0);
            assert!((joint_entropy(&u).unwrap() - 2.0 * lm).abs() < TOL);
            assert!((joint_entropy(&d).unwrap() - lm).abs() < TOL);
            assert!((conditional_entropy(&u).unwrap() - lm).abs() < TOL);
            assert!(conditional_entropy(&d).unwrap().abs() < TOL);
            let mut delta = vec![0.0; m * m];
            delta[m + 1] = 1.0;
            let delta = DiscreteJoint::new(m, delta, Basis::Position, 1.0).unwrap();
            assert_eq!(joint_entropy(&delta).unwrap(), 0.0);

            let uu = ef_min(&pos(u.clone()), &mom(u.clone())).unwrap();
            assert!(uu.ef_min.abs() < TOL);
            let dd = ef_min(&pos(d.clone()), &mom(d.clone())).unwrap();
            assert!((dd.ef_min - 2.0 * lm).abs() < TOL);
        }
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.7, 0.1, 0.1, 0.1];
        let prod = DiscreteJoint::product(&p, &q, Basis::Position, 1.0).unwrap();
        let hp = -p.iter().map(|v| v * f64::log2(*v)).sum::<f64>();
        assert!((conditional_entropy(&prod).unwrap() - hp).abs() < TOL);
    }

    #[test]
    fn rejects_invalid_pairs() {
        let u = DiscreteJoint::uniform(4, Basis::Position, 1.0);
        let unnorm = DiscreteJoint::new(4, vec![0.1; 16], Basis::Position, 1.0).unwrap();
        assert!(matches!(joint_entropy(&unnorm), Err(Error::NotNormalized { .. })));
        let wrong_size = mom(DiscreteJoint::uniform(8, Basis::Momentum, 1.0));
        assert!(ef_min(&pos(u.clone()), &wrong_size).is_err());
        let not_conjugate = DiscreteJoint::uniform(4, Basis::Momentum, 1.0);
        assert!(ef_min(&pos(u.clone()), &not_conjugate).is_err());
        assert!(ef_min(&mom(u.clone()), &pos(u)).is_err());
    }

    #[test]
    fn down_binning_keeps_conjugacy() {
        let m = 16;
        let p = pos(DiscreteJoint::diagonal(m, Basis::Position, 1.0));
        let k = mom(DiscreteJoint::uniform(m, Basis::Momentum, 1.0));
        let pb = p.box_bin(4).unwrap();
        let kc = k.crop(4).unwrap();
        assert_eq!(pb.m(), 4);
        assert!((kc.total() - 1.0).abs() < TOL);
        assert!(ef_min(&pb, &kc).is_ok());
        assert!(p.box_bin(3).is_err());
        assert!(k.crop(5).is_err());
    }

    #[test]
    fn band_masses() {
        let d = DiscreteJoint::diagonal(8, Basis::Position, 1.0);
        assert!((d.band_mass(0, false) - 1.0).abs() < TOL);
        let mut anti = vec![0.0; 64];
        for s in 1..8 {
            anti[s * 8 + (8 - s)] = 1.0 / 7.0;
        }
        anti[0] = 0.0;
        let a = DiscreteJoint::new(8, anti, Basis::Momentum, 1.0).unwrap();
        assert!((a.band_mass(0, true) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_scan_needs_double_crystal() {
        let scenario = Scenario {
            model: SellmeierModel::bbo(),
            pump: PumpSpec {
                lambda_p: 355e-9,
                waist: 507e-6,
            },
            setup: CrystalSetup::single(5e-3, 32.9f64.to_radians()),
            z: 5e-3,
            guard: ParaxialGuard::default(),
        };
        let points = scan(
            &scenario,
            &EntanglementConfig::default(),
            ScanParameter::D,
            &[2e-3, 4e-3],
        );
        assert_eq!(points.len(), 2);
        assert!(points
            .iter()
            .all(|p| p.outcome.as_ref().unwrap_err().category == "config"));
    }

    fn joint_strategy(m: usize) -> impl Strategy<Value = DiscreteJoint> {
        prop::collection::vec(0.0f64..1.0, m * m).prop_filter_map("non-zero", move |v| {
            DiscreteJoint::new(m, v, Basis::Position, 1.0)
                .ok()?
                .normalized()
                .ok()
        })
    }

    /// Position and momentum joints of a product of two single-photon states.
    fn product_state(m: usize, a: &[(f64, f64)], b: &[(f64, f64)]) -> (DiscreteJoint, DiscreteJoint) {
        let dft = |psi: &[(f64, f64)]| -> Vec<f64> {
            (0..m)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, &(x, y)) in psi.iter().enumerate() {
                        let ph = -2.0 * PI * (k * n) as f64 / m as f64;
                        re += x * ph.cos() - y * ph.sin();
                        im += x * ph.sin() + y * ph.cos();
                    }
                    re * re + im * im
                })
                .collect()
        };
        let density = |psi: &[(f64, f64)]| psi.iter().map(|(x, y)| x * x + y * y).collect::<Vec<_>>();
        let p = DiscreteJoint::product(&density(a), &density(b), Basis::Position, 1.0)
            .unwrap()
            .normalized()
            .unwrap();
        let k = DiscreteJoint::product(&dft(a), &dft(b), Basis::Momentum, 2.0 * PI / m as f64)
            .unwrap()
            .normalized()
            .unwrap();
        (p, k)
    }

    proptest! {
        #[test]
        fn conditioning_reduces_entropy(j in joint_strategy(6)) {
            prop_assert!(conditional_entropy(&j).unwrap() <= signal_entropy(&j).unwrap() + 1e-12);
            prop_assert!(conditional_entropy(&j).unwrap() >= -1e-12);
        }

        #[test]
        fn relabeling_invariance(
            p in joint_strategy(5),
            k in joint_strategy(5),
            perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let (p, k) = (pos(p), mom(k));
            let mut v = vec![0.0; 25];
            for s in 0..5 {
                for i in 0..5 {
                    v[perm[s] * 5 + perm[i]] = p.at(s, i);
                }
            }
            let shuffled = DiscreteJoint { values: v, ..p.clone() };
            let a = ef_min(&p, &k).unwrap().ef_min;
            let b = ef_min(&shuffled, &k).unwrap().ef_min;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn uniform_noise_never_raises_the_bound(
            p in joint_strategy(5),
            k in joint_strategy(5),
            e1 in 0.0f64..1.0,
            e2 in 0.0f64..1.0,
        ) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let (p, k) = (pos(p), mom(k));
            let a = ef_bound(&[(p.mix_uniform(lo), k.mix_uniform(lo))]).unwrap().ef_min;
            let b = ef_bound(&[(p.mix_uniform(hi), k.mix_uniform(hi))]).unwrap().ef_min;
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn product_states_are_not_certified(
            a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
            b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
        ) {
            prop_assume!(a.iter().any(|(x, y)| x.abs() + y.abs() > 1e-3));
            prop_assume!(b.iter().any(|(x, y)| x.abs() + y.abs() > 1e-3));
            let (p, k) = product_state(6, &a, &b);
            prop_assert!(ef_bound(&[(p, k)]).unwrap().ef_min <= 1e-9);
        }
    }
}
