//! Joints over one transverse axis with the other axis integrated out,
//! evaluated without materializing the 4D array.
//!
//! The integrated axis is kept in momentum space. Summing `|A|^2` over its
//! momenta equals summing over its positions (Parseval), and its Fresnel
//! phase is a constant per node that drops out of `|A|^2`. Only the resolved
//! axis is transformed, on a line grid that can be much finer than a 4D grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::amplitude::Basis;
use super::distribution::{Axis, Distribution};
use super::fft::{CenteredFft, Direction};
use super::grid::LineGrid;
use crate::error::{Error, Result};
use crate::phasematch::SpdcSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransverseAxis {
    X,
    Y,
}

impl TransverseAxis {
    pub fn label(&self) -> &'static str {
        match self {
            TransverseAxis::X => "x",
            TransverseAxis::Y => "y",
        }
    }
}

/// Weighted nodes `(q_s, q_i, w)` over the integrated axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PairQuadrature {
    nodes: Vec<[f64; 3]>,
}

impl PairQuadrature {
    /// Every pair of nodes of `line`, each with weight `dq^2`.
    pub fn rectangular(line: &LineGrid) -> Self {
        let w = line.dq * line.dq;
        let q = line.momenta();
        let nodes = q
            .iter()
            .flat_map(|&a| q.iter().map(move |&b| [a, b, w]))
            .collect();
        Self { nodes }
    }

    /// Nodes in sum and half-difference coordinates `Q = q_s + q_i`,
    /// `q = (q_s - q_i) / 2` (unit Jacobian).
    ///
    /// `Q` takes `sum_nodes` evenly spaced values over `|Q| <= sum_extent / waist`
    /// and `q` takes `diff_nodes` trapezoid nodes over `[0, diff_max]`, with
    /// weights doubled for the mirrored half since the amplitude is even in `q`.
    pub fn pump_relative(
        waist: f64,
        sum_nodes: usize,
        sum_extent: f64,
        diff_nodes: usize,
        diff_max: f64,
    ) -> Result<Self> {
        if sum_nodes < 2 || diff_nodes < 2 {
            return Err(Error::Config(
                "quadrature needs at least two nodes per coordinate".into(),
            ));
        }
        if !(waist > 0.0 && sum_extent > 0.0 && diff_max > 0.0) {
            return Err(Error::Config("quadrature extents must be positive".into()));
        }
        let q_sum = sum_extent / waist;
        let h_sum = 2.0 * q_sum / (sum_nodes - 1) as f64;
        let h_diff = diff_max / (diff_nodes - 1) as f64;
        let mut nodes = Vec::with_capacity(sum_nodes * diff_nodes);
        for a in 0..sum_nodes {
            let big = -q_sum + a as f64 * h_sum;
            for b in 0..diff_nodes {
                let small = b as f64 * h_diff;
                let trap = if b == 0 || b == diff_nodes - 1 { 0.5 } else { 1.0 };
                let w = h_sum * h_diff * trap * 2.0;
                nodes.push([0.5 * big + small, 0.5 * big - small, w]);
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Averaged joints over one axis: the momentum joint and a position joint
/// for each requested propagation distance.
#[derive(Debug, Clone)]
pub struct AveragedJoints {
    pub axis: TransverseAxis,
    pub line: LineGrid,
    pub momentum: Distribution,
    pub positions: Vec<Distribution>,
    pub zs: Vec<f64>,
}

/// Quadrature nodes folded per parallel task.
const NODE_CHUNK: usize = 8;
/// Tasks evaluated before their partial sums are merged.
const TASK_BATCH: usize = 8;

struct Partial {
    momentum: Vec<f64>,
    positions: Vec<Vec<f64>>,
}

impl Partial {
    fn zeros(len: usize, nz: usize) -> Self {
        Self {
            momentum: vec![0.0; len],
            positions: vec![vec![0.0; len]; nz],
        }
    }

    fn add(&mut self, other: &Partial) {
        add_into(&mut self.momentum, &other.momentum);
        for (a, b) in self.positions.iter_mut().zip(&other.positions) {
            add_into(a, b);
        }
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

/// Evaluates the `axis` joints on `line` with the other axis integrated by `quad`.
///
/// The result does not depend on the number of worker threads.
pub fn averaged_joints(
    source: &SpdcSource,
    axis: TransverseAxis,
    line: &LineGrid,
    quad: &PairQuadrature,
    zs: &[f64],
) -> Result<AveragedJoints> {
    line.validate()?;
    if quad.is_empty() {
        return Err(Error::Config("empty quadrature".into()));
    }
    let n = line.n;
    let q = line.momenta();
    let k = source.kinematics().signal_wavenumber();
    let fft = CenteredFft::new(n, Direction::Inverse);
    let scale = line.dq / (2.0 * PI).sqrt();
    let phases: Vec<Vec<Complex64>> = zs
        .iter()
        .map(|&z| {
            q.iter()
                .map(|&qv| Complex64::from_polar(1.0, -qv * qv * z / (2.0 * k)))
                .collect()
        })
        .collect();

    let eval_chunk = |chunk: &[[f64; 3]]| -> Partial {
        let mut part = Partial::zeros(n * n, zs.len());
        let mut amp = vec![Complex64::new(0.0, 0.0); n * n];
        let mut work = vec![Complex64::new(0.0, 0.0); n * n];
        for &[qs, qi, w] in chunk {
            for a in 0..n {
                for b in 0..n {
                    amp[a * n + b] = match axis {
                        TransverseAxis::X => source.amplitude_raw(q[a], qs, q[b], qi),
                        TransverseAxis::Y => source.amplitude_raw(qs, q[a], qi, q[b]),
                    };
                }
            }
            for (m, v) in part.momentum.iter_mut().zip(&amp) {
                *m += w * v.norm_sqr();
            }
            for (phase, pos) in phases.iter().zip(part.positions.iter_mut()) {
                for a in 0..n {
                    for b in 0..n {
                        work[a * n + b] = amp[a * n + b] * phase[a] * phase[b];
                    }
                }
                fft.process_axis(&mut work, &[n, n], 0, scale);
                fft.process_axis(&mut work, &[n, n], 1, scale);
                for (p, v) in pos.iter_mut().zip(&work) {
                    *p += w * v.norm_sqr();
                }
            }
        }
        part
    };

    let chunks: Vec<&[[f64; 3]]> = quad.nodes.chunks(NODE_CHUNK).collect();
    let mut total = Partial::zeros(n * n, zs.len());
    for batch in chunks.chunks(TASK_BATCH) {
        let parts: Vec<Partial> = batch.par_iter().map(|c| eval_chunk(c)).collect();
        for p in &parts {
            total.add(p);
        }
    }

    let label = axis.label();
    let mom_axes = vec![
        Axis::new(&format!("q_s{label}"), n, line.dq, Basis::Momentum),
        Axis::new(&format!("q_i{label}"), n, line.dq, Basis::Momentum),
    ];
    let pos_axes = vec![
        Axis::new(&format!("{label}_s"), n, line.dx(), Basis::Position),
        Axis::new(&format!("{label}_i"), n, line.dx(), Basis::Position),
    ];
    let momentum = Distribution::new(total.momentum, mom_axes)?.normalized()?;
    let positions = total
        .positions
        .into_iter()
        .map(|v| Distribution::new(v, pos_axes.clone())?.normalized())
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedJoints {
        axis,
        line: *line,
        momentum,
        positions,
        zs: zs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::SellmeierModel;
    use crate::fields::amplitude::{build_amplitude, AmplitudeOptions};
    use crate::fields::distribution::{averaged_joint_x, momentum_pdf, position_pdf};
    use crate::fields::grid::{ExtentPolicy, MomentumGrid4};
    use crate::phasematch::{CrystalSetup, PumpSpec};

    fn source(theta_deg: f64) -> SpdcSource {
        SpdcSource::new(
            &SellmeierModel::bbo(),
            PumpSpec {
                lambda_p: 355e-9,
                waist: 507e-6,
            },
            CrystalSetup::single(5e-3, theta_deg.to_radians()),
        )
        .unwrap()
    }

    fn max_abs_diff(a: &Distribution, b: &Distribution) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_full_grid_reduction() {
        let src = source(32.94);
        let grid = MomentumGrid4::auto(16, &src, &ExtentPolicy::default()).unwrap();
        let z = 5e-3;
        let joints = averaged_joints(
            &src,
            TransverseAxis::X,
            &grid.axis,
            &PairQuadrature::rectangular(&grid.axis),
            &[z],
        )
        .unwrap();
        let amp = build_amplitude(&grid, &src, AmplitudeOptions::unchecked()).unwrap();
        let mom = averaged_joint_x(&momentum_pdf(&amp).unwrap()).unwrap();
        let pos4 = position_pdf(&amp.propagate(z).unwrap().to_position().unwrap()).unwrap();
        let pos = averaged_joint_x(&pos4).unwrap();
        assert!(max_abs_diff(&joints.momentum, &mom) < 1e-12);
        assert!(max_abs_diff(&joints.positions[0], &pos) < 1e-12);
    }

    #[test]
    fn quadrature_weights() {
        let q = PairQuadrature::pump_relative(507e-6, 9, 4.0, 64, 3e5).unwrap();
        assert_eq!(q.len(), 9 * 64);
        let area: f64 = q.nodes().iter().map(|n| n[2]).sum();
        // rectangle in (Q, q) covering |Q| <= 8/w0 (endpoints inclusive) and |q| <= 3e5
        let expect = (2.0 * 4.0 / 507e-6) * (9.0 / 8.0) * 2.0 * 3e5;
        assert!((area / expect - 1.0).abs() < 1e-12);
        assert!(PairQuadrature::pump_relative(507e-6, 1, 4.0, 64, 3e5).is_err());
    }

    #[test]
    fn deterministic_and_axis_symmetric_at_origin() {
        let src = source(32.9);
        let line = LineGrid::new(32, 1.5e4).unwrap();
        let quad = PairQuadrature::pump_relative(507e-6, 5, 4.0, 16, 2e5).unwrap();
        let a = averaged_joints(&src, TransverseAxis::X, &line, &quad, &[0.0, 5e-3]).unwrap();
        let b = averaged_joints(&src, TransverseAxis::X, &line, &quad, &[0.0, 5e-3]).unwrap();
        assert_eq!(a.positions[1].values(), b.positions[1].values());
        assert_eq!(a.momentum.values(), b.momentum.values());
        let y = averaged_joints(&src, TransverseAxis::Y, &line, &quad, &[5e-3]).unwrap();
        // walk-off makes x and y differ, but only slightly
        assert!(
            max_abs_diff(&a.momentum, &y.momentum)
                < 0.05 * a.momentum.values().iter().cloned().fold(0.0, f64::max)
        );
    }
}
