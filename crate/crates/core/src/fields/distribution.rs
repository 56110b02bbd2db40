use serde::{Deserialize, Serialize};

use super::amplitude::{Basis, BiphotonAmplitude4};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-10;

/// Smallest fraction of the total mass a conditioning slice may hold.
pub const MIN_SLICE_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub len: usize,
    pub bin_width: f64,
    pub unit: String,
    pub basis: Basis,
}

impl Axis {
    pub fn new(name: &str, len: usize, bin_width: f64, basis: Basis) -> Self {
        let unit = match basis {
            Basis::Momentum => "rad/m",
            Basis::Position => "m",
        };
        Self {
            name: name.to_string(),
            len,
            bin_width,
            unit: unit.to_string(),
            basis,
        }
    }

    /// Centered coordinate of bin `idx`.
    #[inline]
    pub fn coordinate(&self, idx: usize) -> f64 {
        (idx as f64 - (self.len / 2) as f64) * self.bin_width
    }
}

/// Non-negative array of per-bin probabilities, row-major over `axes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    values: Vec<f64>,
    axes: Vec<Axis>,
    normalized: bool,
}

const MOMENTUM_NAMES: [&str; 4] = ["q_sx", "q_sy", "q_ix", "q_iy"];
const POSITION_NAMES: [&str; 4] = ["x_s", "y_s", "x_i", "y_i"];

fn names(basis: Basis) -> [&'static str; 4] {
    match basis {
        Basis::Momentum => MOMENTUM_NAMES,
        Basis::Position => POSITION_NAMES,
    }
}

impl Distribution {
    pub fn new(values: Vec<f64>, axes: Vec<Axis>) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.len).product();
        if values.len() != len {
            return Err(Error::Shape(format!(
                "{} values for axes of total size {len}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Shape(format!(
                "distribution entry {v} is not a finite non-negative number"
            )));
        }
        let mut dist = Self {
            values,
            axes,
            normalized: false,
        };
        dist.normalized = (dist.total() - 1.0).abs() <= NORM_TOL;
        Ok(dist)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn basis(&self) -> Basis {
        self.axes[0].basis
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::NotNormalized { total });
        }
        self.values.iter_mut().for_each(|v| *v /= total);
        self.normalized = true;
        Ok(self)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a 2D index.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axes[1].len + j]
    }

    /// Sums out every axis not listed in `keep` (listed in increasing order).
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= self.ndim()) {
            return Err(Error::Shape(format!(
                "invalid axes {keep:?} for a {}D array",
                self.ndim()
            )));
        }
        let shape = self.shape();
        let out_shape: Vec<usize> = keep.iter().map(|&k| shape[k]).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        let mut idx = vec![0usize; shape.len()];
        for v in &self.values {
            let mut flat = 0;
            for (&k, &len) in keep.iter().zip(&out_shape) {
                flat = flat * len + idx[k];
            }
            out[flat] += v;
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let axes = keep.iter().map(|&k| self.axes[k].clone()).collect();
        let dist = Self::new(out, axes)?;
        if self.normalized {
            dist.normalized()
        } else {
            Ok(dist)
        }
    }

    fn require_4d(&self) -> Result<()> {
        if self.ndim() != 4 {
            return Err(Error::Shape(format!(
                "expected a 4D distribution, got {}D",
                self.ndim()
            )));
        }
        Ok(())
    }

    fn require_2d(&self) -> Result<()> {
        if self.ndim() != 2 {
            return Err(Error::Shape(format!(
                "expected a 2D distribution, got {}D",
                self.ndim()
            )));
        }
        Ok(())
    }
}

fn pdf4(amp: &BiphotonAmplitude4) -> Result<Distribution> {
    let n = amp.grid().n();
    let w = amp.bin_width();
    let vol = w.powi(4);
    let values = amp.values().iter().map(|v| v.norm_sqr() * vol).collect();
    let axes = names(amp.basis())
        .iter()
        .map(|name| Axis::new(name, n, w, amp.basis()))
        .collect();
    Distribution::new(values, axes)?.normalized()
}

/// `|A(q_s, q_i)|^2` as per-bin probabilities.
pub fn momentum_pdf(amp: &BiphotonAmplitude4) -> Result<Distribution> {
    if amp.basis() != Basis::Momentum {
        return Err(Error::Basis {
            expected: "momentum",
            found: amp.basis().as_str(),
        });
    }
    pdf4(amp)
}

/// `|A(rho_s, rho_i; z)|^2` as per-bin probabilities.
pub fn position_pdf(amp: &BiphotonAmplitude4) -> Result<Distribution> {
    if amp.basis() != Basis::Position {
        return Err(Error::Basis {
            expected: "position",
            found: amp.basis().as_str(),
        });
    }
    pdf4(amp)
}

/// Joint over `(s_x, i_x)` with both `y` axes summed out.
pub fn averaged_joint_x(dist4: &Distribution) -> Result<Distribution> {
    dist4.require_4d()?;
    dist4.marginal(&[0, 2])?.normalized()
}

/// One-photon image: both idler axes summed out.
pub fn singles(dist4: &Distribution) -> Result<Distribution> {
    dist4.require_4d()?;
    dist4.marginal(&[0, 1])?.normalized()
}

/// Signal distribution given the idler at the grid node nearest `idler`.
///
/// Coordinates are in the distribution's own basis.
pub fn conditional_on_idler(dist4: &Distribution, idler: (f64, f64)) -> Result<Distribution> {
    dist4.require_4d()?;
    let ax = &dist4.axes[2];
    let ay = &dist4.axes[3];
    let node = |a: &Axis, c: f64| {
        let idx = (c / a.bin_width).round() + (a.len / 2) as f64;
        if idx >= 0.0 && idx < a.len as f64 {
            Ok(idx as usize)
        } else {
            Err(Error::Config(format!(
                "idler coordinate {c} lies outside the {} axis",
                a.name
            )))
        }
    };
    let (ix, iy) = (node(ax, idler.0)?, node(ay, idler.1)?);
    let (n0, n1) = (dist4.axes[0].len, dist4.axes[1].len);
    let mut slice = Vec::with_capacity(n0 * n1);
    for a in 0..n0 {
        for b in 0..n1 {
            slice.push(dist4.values[((a * n1 + b) * ax.len + ix) * ay.len + iy]);
        }
    }
    let total = dist4.total();
    let mass: f64 = slice.iter().sum();
    if !(mass > MIN_SLICE_FRACTION * total) {
        return Err(Error::DegenerateConditioning {
            fraction: if total > 0.0 { mass / total } else { 0.0 },
        });
    }
    Distribution::new(slice, dist4.axes[..2].to_vec())?.normalized()
}

/// Signal position distribution given the idler detected near `rho_i0` (m).
pub fn conditional_position(dist4: &Distribution, rho_i0: (f64, f64)) -> Result<Distribution> {
    if dist4.basis() != Basis::Position {
        return Err(Error::Basis {
            expected: "position",
            found: dist4.basis().as_str(),
        });
    }
    conditional_on_idler(dist4, rho_i0)
}

/// Mean value in rings of integer pixel radius `round(r / bin)` about the
/// center of a square 2D distribution, for radii `0..len/2`.
pub fn radial_profile(dist2: &Distribution) -> Result<Vec<f64>> {
    dist2.require_2d()?;
    let n = dist2.axes[0].len;
    if dist2.axes[1].len != n {
        return Err(Error::Shape("radial profile needs a square array".into()));
    }
    let half = n / 2;
    let mut sum = vec![0.0; half];
    let mut count = vec![0usize; half];
    for a in 0..n {
        for b in 0..n {
            let (da, db) = (a as f64 - half as f64, b as f64 - half as f64);
            let r = (da * da + db * db).sqrt().round() as usize;
            if r < half {
                sum[r] += dist2.at2(a, b);
                count[r] += 1;
            }
        }
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect())
}

/// Number of local maxima of a 1D profile: interior points above their left
/// neighbour and not below their right one, plus a strictly dominant first point.
pub fn count_local_maxima(profile: &[f64]) -> usize {
    let n = profile.len();
    if n < 2 {
        return n;
    }
    let mut count = usize::from(profile[0] > profile[1]);
    for i in 1..n - 1 {
        if profile[i] > profile[i - 1] && profile[i] >= profile[i + 1] {
            count += 1;
        }
    }
    count
}

/// Index of the largest entry, first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

/// Pearson correlation between the coordinates of the two axes of a 2D
/// distribution, weighted by its values.
pub fn pearson(dist2: &Distribution) -> Result<f64> {
    dist2.require_2d()?;
    let (a0, a1) = (&dist2.axes[0], &dist2.axes[1]);
    let total = dist2.total();
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..a0.len {
        for j in 0..a1.len {
            let p = dist2.at2(i, j) / total;
            m0 += p * a0.coordinate(i);
            m1 += p * a1.coordinate(j);
        }
    }
    let (mut c00, mut c11, mut c01) = (0.0, 0.0, 0.0);
    for i in 0..a0.len {
        for j in 0..a1.len {
            let p = dist2.at2(i, j) / total;
            let (u, v) = (a0.coordinate(i) - m0, a1.coordinate(j) - m1);
            c00 += p * u * u;
            c11 += p * v * v;
            c01 += p * u * v;
        }
    }
    Ok(c01 / (c00 * c11).sqrt())
}
