//! Synthetic single-photon camera frames and the accidental-subtracted
//! coincidence estimator `C_pq = <n_p n_q> - <n_p^(i) n_q^(i+1)>`.
//!
//! Both photons of a pair land on the same sensor. The same-frame term on
//! the diagonal `p = q` uses the factorial moment `n_p (n_p - 1)`, which
//! makes the estimator unbiased for independent Poisson counts.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Basis, Distribution};

/// Pixel indices and counts of one frame.
type SparseFrame = Vec<(u32, u16)>;

/// Camera geometry and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    /// Pixel pitch (m).
    pub pitch: f64,
    pub quantum_efficiency: f64,
    /// Mean dark counts per pixel per frame.
    pub dark_rate: f64,
    /// Region of interest in pixels, `(columns, rows)`.
    pub roi: (usize, usize),
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            pitch: 16e-6,
            quantum_efficiency: 0.6,
            dark_rate: 1e-3,
            roi: (64, 64),
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(Error::Config("pixel pitch must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::Config("quantum efficiency must lie in [0, 1]".into()));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::Config("dark rate must be non-negative".into()));
        }
        if self.roi.0 == 0 || self.roi.1 == 0 || self.pixels() > u32::MAX as usize {
            return Err(Error::Config(format!(
                "invalid region of interest {:?}",
                self.roi
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.roi.0 * self.roi.1
    }

    /// Fraction of each grid cell `(j - n/2) dx +- dx/2` falling in each
    /// pixel column `(c - npx/2) pitch .. + pitch`, as `(pixel, weight)` lists.
    pub fn overlap_weights(&self, n: usize, dx: f64, npx: usize) -> Vec<Vec<(usize, f64)>> {
        let origin = -(npx as f64) * self.pitch / 2.0;
        (0..n)
            .map(|j| {
                let lo = (j as f64 - (n / 2) as f64 - 0.5) * dx - origin;
                let hi = lo + dx;
                let first = (lo / self.pitch).floor().max(0.0) as usize;
                let last = ((hi / self.pitch).ceil() as usize).min(npx);
                (first..last)
                    .filter_map(|c| {
                        let a = lo.max(c as f64 * self.pitch);
                        let b = hi.min((c + 1) as f64 * self.pitch);
                        (b > a).then(|| (c, (b - a) / dx))
                    })
                    .collect()
            })
            .collect()
    }

    fn pixel_of(&self, x: f64, npx: usize) -> Option<usize> {
        let c = (x / self.pitch + npx as f64 / 2.0).floor();
        (c >= 0.0 && c < npx as f64).then_some(c as usize)
    }
}

/// Vose alias table.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0 || !(total > 0.0) || n > u32::MAX as usize {
            return Err(Error::NotNormalized { total });
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Ok(Self { prob, alias })
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

/// Draws `(signal node, idler node)` from a 4D position distribution: the
/// signal from its marginal, the idler from the slice at that signal node.
pub struct PairSampler<'a> {
    values: &'a [f64],
    nodes: usize,
    signal: AliasTable,
    idler: Vec<OnceLock<Option<AliasTable>>>,
}

impl<'a> PairSampler<'a> {
    pub fn new(dist4: &'a Distribution) -> Result<Self> {
        let shape = dist4.shape();
        if shape.len() != 4 || shape.iter().any(|&s| s != shape[0]) {
            return Err(Error::Shape(format!(
                "pair sampling needs a hypercubic 4D array, got {shape:?}"
            )));
        }
        let nodes = shape[0] * shape[0];
        let values = dist4.values();
        let marginal: Vec<f64> = values.chunks(nodes).map(|c| c.iter().sum()).collect();
        Ok(Self {
            values,
            nodes,
            signal: AliasTable::new(&marginal)?,
            idler: (0..nodes).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Node indices `row * n + col` flattened over `(x, y)`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let s = self.signal.sample(rng);
        let table = self.idler[s]
            .get_or_init(|| AliasTable::new(&self.values[s * self.nodes..(s + 1) * self.nodes]).ok());
        let i = table.as_ref().expect("sampled signal node has mass").sample(rng);
        (s, i)
    }
}

/// Sparse frame stack: `(pixel, count)` runs per frame, pixels row-major
/// over the region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStack {
    pub detector: DetectorModel,
    pub mu_pairs: f64,
    pub seed: u64,
    pub fingerprint: Option<String>,
    offsets: Vec<usize>,
    entries: Vec<(u32, u16)>,
}

impl FrameStack {
    pub fn empty(detector: DetectorModel, mu_pairs: f64, seed: u64) -> Self {
        Self {
            detector,
            mu_pairs,
            seed,
            fingerprint: None,
            offsets: vec![0],
            entries: Vec::new(),
        }
    }

    /// Appends a frame given as dense per-pixel counts.
    pub fn push_dense(&mut self, counts: &[u16]) -> Result<()> {
        if counts.len() != self.detector.pixels() {
            return Err(Error::Shape(format!(
                "frame has {} pixels, region of interest has {}",
                counts.len(),
                self.detector.pixels()
            )));
        }
        self.entries.extend(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(p, &c)| (p as u32, c)),
        );
        self.offsets.push(self.entries.len());
        Ok(())
    }

    fn push_sparse(&mut self, frame: &[(u32, u16)]) {
        self.entries.extend_from_slice(frame);
        self.offsets.push(self.entries.len());
    }

    pub fn n_frames(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Non-zero `(pixel, count)` pairs of frame `i`, ascending in pixel.
    pub fn frame(&self, i: usize) -> &[(u32, u16)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn dense_frame(&self, i: usize) -> Vec<u16> {
        let mut out = vec![0u16; self.detector.pixels()];
        for &(p, c) in self.frame(i) {
            out[p as usize] = c;
        }
        out
    }

    pub fn total_counts(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    /// Summed counts per pixel over all frames.
    pub fn sum_image(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.detector.pixels()];
        for &(p, c) in &self.entries {
            out[p as usize] += c as u64;
        }
        out
    }

    pub fn mean_counts_per_pixel(&self) -> f64 {
        self.total_counts() as f64 / (self.n_frames() * self.detector.pixels()) as f64
    }
}

/// Frames simulated per parallel task.
const FRAME_CHUNK: usize = 1024;

/// Simulates `n_frames` camera exposures of a 4D position distribution.
///
/// Each frame draws a Poisson number of pairs, thins each photon by the
/// quantum efficiency, places it uniformly within its grid cell and adds
/// Poisson dark counts. Frame `i` uses its own ChaCha8 stream `i` of `seed`,
/// so the stack does not depend on the thread count.
pub fn synth_frames(
    dist4: &Distribution,
    detector: &DetectorModel,
    mu_pairs: f64,
    n_frames: usize,
    seed: u64,
) -> Result<FrameStack> {
    detector.validate()?;
    if !(mu_pairs >= 0.0 && mu_pairs.is_finite()) {
        return Err(Error::Config(format!(
            "mean pairs per frame must be non-negative, got {mu_pairs}"
        )));
    }
    if dist4.ndim() != 4 || dist4.basis() != Basis::Position {
        return Err(Error::Basis {
            expected: "position",
            found: dist4.basis().as_str(),
        });
    }
    if !dist4.is_normalized() {
        return Err(Error::NotNormalized { total: dist4.total() });
    }
    let n = dist4.shape()[0];
    let dx = dist4.axes()[0].bin_width;
    let window = n as f64 * dx;
    let roi = (detector.roi.0.min(detector.roi.1)) as f64 * detector.pitch;
    if window > roi {
        return Err(Error::RoiTooSmall {
            roi_um: roi * 1e6,
            support_um: window * 1e6,
        });
    }
    let sampler = PairSampler::new(dist4)?;
    let pairs = (mu_pairs > 0.0)
        .then(|| Poisson::new(mu_pairs))
        .transpose()
        .map_err(|e| Error::Config(e.to_string()))?;
    let dark_mean = detector.dark_rate * detector.pixels() as f64;
    let dark = (dark_mean > 0.0)
        .then(|| Poisson::new(dark_mean))
        .transpose()
        .map_err(|e| Error::Config(e.to_string()))?;
    let (nx, ny) = detector.roi;

    let frame = |index: usize| -> Result<Vec<(u32, u16)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut hits: Vec<u32> = Vec::new();
        let k = pairs.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as u64;
        for _ in 0..k {
            let (s, i) = sampler.sample(&mut rng);
            for node in [s, i] {
                if rng.random::<f64>() >= detector.quantum_efficiency {
                    continue;
                }
                let (jy, jx) = (node / n, node % n);
                let x = (jx as f64 - (n / 2) as f64 + rng.random::<f64>() - 0.5) * dx;
                let y = (jy as f64 - (n / 2) as f64 + rng.random::<f64>() - 0.5) * dx;
                if let (Some(c), Some(r)) = (detector.pixel_of(x, nx), detector.pixel_of(y, ny)) {
                    hits.push((r * nx + c) as u32);
                }
            }
        }
        let n_dark = dark.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as u64;
        for _ in 0..n_dark {
            hits.push(rng.random_range(0..(nx * ny) as u32));
        }
        hits.sort_unstable();
        let mut out: Vec<(u32, u16)> = Vec::with_capacity(hits.len());
        for p in hits {
            match out.last_mut() {
                Some((q, c)) if *q == p => {
                    *c = c.checked_add(1).ok_or(Error::Overflow("pixel count"))?;
                }
                _ => out.push((p, 1)),
            }
        }
        Ok(out)
    };

    let mut stack = FrameStack::empty(*detector, mu_pairs, seed);
    let starts: Vec<usize> = (0..n_frames).step_by(FRAME_CHUNK).collect();
    let chunks: Vec<Result<Vec<SparseFrame>>> = starts
        .par_iter()
        .map(|&start| (start..(start + FRAME_CHUNK).min(n_frames)).map(frame).collect())
        .collect();
    for chunk in chunks {
        for f in chunk? {
            stack.push_sparse(&f);
        }
    }
    Ok(stack)
}

/// Channels the estimator is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Pixel columns after summing each column over rows; the map is
    /// `C(x_a, x_b)` over all column pairs.
    ColumnPairs,
    /// All pixels against the fixed pixel `(column, row)`; the map is an image.
    ConditionalRow { column: usize, row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMap {
    pub reduction: Reduction,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_frames: usize,
}

/// Accidental-subtracted coincidences, accumulated in one pass over the
/// frames with exact integer sums.
pub fn coincidence_map(stack: &FrameStack, reduction: Reduction) -> Result<CoincidenceMap> {
    let nf = stack.n_frames();
    if nf < 2 {
        return Err(Error::Config(
            "coincidence estimation needs at least two frames".into(),
        ));
    }
    let (nx, ny) = stack.detector.roi;
    let (channels, fixed, rows, cols) = match reduction {
        Reduction::ColumnPairs => (nx, None, nx, nx),
        Reduction::ConditionalRow { column, row } => {
            if column >= nx || row >= ny {
                return Err(Error::Config(format!(
                    "pixel ({column}, {row}) outside the region of interest"
                )));
            }
            (nx * ny, Some(row * nx + column), ny, nx)
        }
    };
    let to_channels = |frame: &[(u32, u16)]| -> Vec<(usize, i128)> {
        let mut out: Vec<(usize, i128)> = Vec::with_capacity(frame.len());
        for &(p, c) in frame {
            let ch = match reduction {
                Reduction::ColumnPairs => p as usize % nx,
                Reduction::ConditionalRow { .. } => p as usize,
            };
            out.push((ch, c as i128));
        }
        out.sort_unstable_by_key(|e| e.0);
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        out
    };

    let n_rows = fixed.map_or(channels, |_| 1);
    let mut sum = vec![0i128; n_rows * channels];
    let mut sum_sq = vec![0i128; n_rows * channels];
    let mut cur_dense = vec![0i128; channels];
    let mut next_dense = vec![0i128; channels];
    let first = to_channels(stack.frame(0));
    let mut cur = first.clone();
    let mut touched: Vec<usize> = Vec::new();
    let overflow = || Error::Overflow("coincidence accumulator");
    for i in 0..nf {
        let next = if i + 1 < nf {
            to_channels(stack.frame(i + 1))
        } else {
            first.clone()
        };
        for &(c, v) in &cur {
            cur_dense[c] = v;
        }
        for &(c, v) in &next {
            next_dense[c] = v;
        }
        touched.clear();
        touched.extend(cur.iter().chain(&next).map(|e| e.0));
        touched.sort_unstable();
        touched.dedup();
        for &(p, a) in &cur {
            let row = match fixed {
                None => p,
                Some(f) if f == p => 0,
                Some(_) => continue,
            };
            for &q in &touched {
                let same = if q == p { a * (a - 1) } else { a * cur_dense[q] };
                let d = same - a * next_dense[q];
                if d == 0 {
                    continue;
                }
                let k = row * channels + q;
                sum[k] = sum[k].checked_add(d).ok_or_else(overflow)?;
                sum_sq[k] = sum_sq[k]
                    .checked_add(d.checked_mul(d).ok_or_else(overflow)?)
                    .ok_or_else(overflow)?;
            }
        }
        for &(c, _) in &cur {
            cur_dense[c] = 0;
        }
        for &(c, _) in &next {
            next_dense[c] = 0;
        }
        cur = next;
    }

    let n = nf as f64;
    let values: Vec<f64> = sum.iter().map(|&s| s as f64 / n).collect();
    let std_error = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &s2)| {
            let mean = s as f64 / n;
            let var = ((s2 as f64 / n - mean * mean) * n / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(CoincidenceMap {
        reduction,
        rows,
        cols,
        values,
        std_error,
        n_frames: nf,
    })
}

/// Expected column-pair joint of the camera for a 4D position distribution:
/// `P(a, b) + P(b, a)` with `P` the averaged `(x_s, x_i)` joint mapped onto
/// pixel columns by exact cell overlap. Sums to 2 over the sensor.
pub fn expected_column_joint(dist4: &Distribution, detector: &DetectorModel) -> Result<Vec<f64>> {
    let avg = crate::fields::averaged_joint_x(dist4)?;
    let n = avg.shape()[0];
    let nx = detector.roi.0;
    let weights = detector.overlap_weights(n, avg.axes()[0].bin_width, nx);
    let mut out = vec![0.0; nx * nx];
    for js in 0..n {
        for ji in 0..n {
            let p = avg.at2(js, ji);
            if p == 0.0 {
                continue;
            }
            for &(a, wa) in &weights[js] {
                for &(b, wb) in &weights[ji] {
                    out[a * nx + b] += p * wa * wb;
                    out[b * nx + a] += p * wa * wb;
                }
            }
        }
    }
    Ok(out)
}

/// Expected one-photon image over the region of interest, row-major.
pub fn expected_singles_image(dist4: &Distribution, detector: &DetectorModel) -> Result<Vec<f64>> {
    let s = crate::fields::singles(dist4)?;
    let n = s.shape()[0];
    let (nx, ny) = detector.roi;
    let dx = s.axes()[0].bin_width;
    let wx = detector.overlap_weights(n, dx, nx);
    let wy = detector.overlap_weights(n, dx, ny);
    let mut out = vec![0.0; nx * ny];
    for jx in 0..n {
        for jy in 0..n {
            let p = s.at2(jx, jy);
            for &(c, a) in &wx[jx] {
                for &(r, b) in &wy[jy] {
                    out[r * nx + c] += p * a * b;
                }
            }
        }
    }
    Ok(out)
}

/// Indices of the largest entries that together hold `fraction` of the total.
pub fn mass_region(values: &[f64], fraction: f64) -> Vec<usize> {
    let total: f64 = values.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut acc = 0.0;
    let mut out = Vec::new();
    for i in order {
        if acc >= fraction * total {
            break;
        }
        acc += values[i];
        out.push(i);
    }
    out
}

/// Pearson correlation of two equally long samples.
pub fn pearson_samples(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

const FRAME_MAGIC: &str = "FRM1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameHeader {
    magic: String,
    columns: usize,
    rows: usize,
    n_frames: usize,
    seed: u64,
    mu_pairs: f64,
    detector: DetectorModel,
    dtype: String,
    #[serde(default)]
    fingerprint: Option<String>,
}

/// Writes one JSON header line, then every frame as dense little-endian
/// `u16` counts, frame-major and row-major within a frame.
pub fn write_frames<W: Write>(stack: &FrameStack, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let header = FrameHeader {
        magic: FRAME_MAGIC.into(),
        columns: stack.detector.roi.0,
        rows: stack.detector.roi.1,
        n_frames: stack.n_frames(),
        seed: stack.seed,
        mu_pairs: stack.mu_pairs,
        detector: stack.detector,
        dtype: "u16le".into(),
        fingerprint: stack.fingerprint.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut bytes = vec![0u8; 2 * stack.detector.pixels()];
    for i in 0..stack.n_frames() {
        bytes.iter_mut().for_each(|b| *b = 0);
        for &(p, c) in stack.frame(i) {
            bytes[2 * p as usize..2 * p as usize + 2].copy_from_slice(&c.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frames<R: Read>(input: R) -> Result<FrameStack> {
    let mut r = BufReader::new(input);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FrameHeader = serde_json::from_str(line.trim_end())?;
    if header.magic != FRAME_MAGIC || header.dtype != "u16le" {
        return Err(Error::Format(format!(
            "not a frame stack (magic {:?})",
            header.magic
        )));
    }
    if header.detector.roi != (header.columns, header.rows) {
        return Err(Error::Format(
            "header dimensions disagree with the detector".into(),
        ));
    }
    header.detector.validate()?;
    let mut stack = FrameStack::empty(header.detector, header.mu_pairs, header.seed);
    stack.fingerprint = header.fingerprint;
    let npix = header.detector.pixels();
    let mut bytes = vec![0u8; 2 * npix];
    let mut counts = vec![0u16; npix];
    for i in 0..header.n_frames {
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("truncated at frame {i} of {}", header.n_frames)))?;
        for (c, b) in counts.iter_mut().zip(bytes.chunks_exact(2)) {
            *c = u16::from_le_bytes([b[0], b[1]]);
        }
        stack.push_dense(&counts)?;
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after the last frame".into()));
    }
    Ok(stack)
}

pub fn write_frames_file(stack: &FrameStack, path: &Path) -> Result<()> {
    write_frames(stack, std::fs::File::create(path)?)
}

pub fn read_frames_file(path: &Path) -> Result<FrameStack> {
    read_frames(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;

    fn detector(n: usize) -> DetectorModel {
        DetectorModel {
            pitch: 16e-6,
            quantum_efficiency: 1.0,
            dark_rate: 0.0,
            roi: (n, n),
        }
    }

    /// Pairs fixed at two grid nodes mapping to distinct pixels.
    fn point_pair(n: usize) -> Distribution {
        let mut v = vec![0.0; n.pow(4)];
        let (a, b) = (n / 2 - 2, n / 2 + 1);
        v[((a * n + a) * n + b) * n + b] = 1.0;
        let axes = ["x_s", "y_s", "x_i", "y_i"]
            .iter()
            .map(|s| Axis::new(s, n, 16e-6, Basis::Position))
            .collect();
        Distribution::new(v, axes).unwrap()
    }

    #[test]
    fn alias_table_frequencies() {
        let w = [0.1, 0.0, 0.6, 0.3];
        let t = AliasTable::new(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hist = [0usize; 4];
        for _ in 0..200_000 {
            hist[t.sample(&mut rng)] += 1;
        }
        assert_eq!(hist[1], 0);
        for (h, p) in hist.iter().zip(w) {
            let f = *h as f64 / 200_000.0;
            assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / 200_000.0f64).sqrt() + 1e-12);
        }
        assert!(AliasTable::new(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn overlap_weights_partition_cells() {
        let d = DetectorModel::default();
        let w = d.overlap_weights(64, 10.46e-6, 64);
        for cell in &w {
            let s: f64 = cell.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let dist = point_pair(8);
        let det = DetectorModel {
            dark_rate: 0.01,
            quantum_efficiency: 0.7,
            ..detector(8)
        };
        let a = synth_frames(&dist, &det, 1.5, 3000, 42).unwrap();
        let b = synth_frames(&dist, &det, 1.5, 3000, 42).unwrap();
        let c = synth_frames(&dist, &det, 1.5, 3000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_small_roi_and_bad_input() {
        let dist = point_pair(8);
        assert!(matches!(
            synth_frames(&dist, &detector(4), 1.0, 10, 0),
            Err(Error::RoiTooSmall { .. })
        ));
        assert!(synth_frames(&dist, &detector(8), -1.0, 10, 0).is_err());
        let stack = synth_frames(&dist, &detector(8), 1.0, 1, 0).unwrap();
        assert!(coincidence_map(&stack, Reduction::ColumnPairs).is_err());
    }

    #[test]
    fn perfectly_paired_pixels() {
        let dist = point_pair(8);
        let stack = synth_frames(&dist, &detector(8), 2.0, 20_000, 7).unwrap();
        let map = coincidence_map(&stack, Reduction::ColumnPairs).unwrap();
        // each grid cell straddles two pixels per axis: C = mu / 4 per column pair
        let (a, b) = (2, 5);
        let c = map.values[a * 8 + b];
        assert!((c - 0.5).abs() < 5.0 * map.std_error[a * 8 + b], "{c}");
        assert!((map.values[b * 8 + a] - c).abs() < 5.0 * map.std_error[a * 8 + b]);
        let expect = expected_column_joint(&dist, &detector(8)).unwrap();
        assert!((expect[a * 8 + b] - 0.25).abs() < 1e-12);
        let row = coincidence_map(&stack, Reduction::ConditionalRow { column: 2, row: 2 }).unwrap();
        assert_eq!((row.rows, row.cols), (8, 8));
        let r = row.values[5 * 8 + 5];
        assert!((r - 0.125).abs() < 5.0 * row.std_error[5 * 8 + 5], "{r}");
    }

    #[test]
    fn frame_file_round_trip() {
        let dist = point_pair(8);
        let det = DetectorModel {
            dark_rate: 0.2,
            ..detector(8)
        };
        let mut stack = synth_frames(&dist, &det, 3.0, 500, 9).unwrap();
        stack.fingerprint = Some("abc".into());
        let mut buf = Vec::new();
        write_frames(&stack, &mut buf).unwrap();
        let back = read_frames(buf.as_slice()).unwrap();
        assert_eq!(back, stack);
        let mut again = Vec::new();
        write_frames(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert!(read_frames(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_frames(extra.as_slice()).is_err());
    }
}
