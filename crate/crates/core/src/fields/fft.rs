//! Centered discrete Fourier transforms over one axis of a row-major array.
//!
//! With centered indices on both sides, `sum_n a_n exp(+-2 pi i (n - N/2)(m - N/2) / N)`
//! equals `(-1)^m sum_n (-1)^n a_n exp(+-2 pi i n m / N)` whenever `N` is a
//! multiple of four, so the shift reduces to two sign modulations around a
//! plain FFT.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Sign of the exponent: `Inverse` is `exp(+i q x)` (momentum to position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Lines gathered per pass over a strided axis.
const LINE_BLOCK: usize = 64;

pub struct CenteredFft {
    fft: Arc<dyn Fft<f64>>,
    n: usize,
}

impl CenteredFft {
    pub fn new(n: usize, direction: Direction) -> Self {
        assert!(n.is_multiple_of(4), "centered transform needs N divisible by 4");
        let mut planner = FftPlanner::new();
        let fft = match direction {
            Direction::Forward => planner.plan_fft_forward(n),
            Direction::Inverse => planner.plan_fft_inverse(n),
        };
        Self { fft, n }
    }

    /// Transforms every contiguous length-`n` run of `lines` in place and
    /// multiplies the result by `scale`.
    pub fn process_lines(&self, lines: &mut [Complex64], scale: f64) {
        let n = self.n;
        debug_assert_eq!(lines.len() % n, 0);
        for line in lines.chunks_exact_mut(n) {
            for v in line.iter_mut().skip(1).step_by(2) {
                *v = -*v;
            }
        }
        self.fft.process(lines);
        for line in lines.chunks_exact_mut(n) {
            for (m, v) in line.iter_mut().enumerate() {
                *v *= if m % 2 == 0 { scale } else { -scale };
            }
        }
    }

    /// Transforms along `axis` of a row-major array with the given `shape`.
    pub fn process_axis(&self, data: &mut [Complex64], shape: &[usize], axis: usize, scale: f64) {
        assert_eq!(shape[axis], self.n);
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        let n = self.n;
        let stride: usize = shape[axis + 1..].iter().product();
        if stride == 1 {
            self.process_lines(data, scale);
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); LINE_BLOCK.min(stride) * n];
        for block in data.chunks_exact_mut(n * stride) {
            let mut col = 0;
            while col < stride {
                let width = LINE_BLOCK.min(stride - col);
                let buf = &mut buf[..width * n];
                for k in 0..n {
                    let row = &block[k * stride + col..k * stride + col + width];
                    for (c, v) in row.iter().enumerate() {
                        buf[c * n + k] = *v;
                    }
                }
                self.process_lines(buf, scale);
                for k in 0..n {
                    let row = &mut block[k * stride + col..k * stride + col + width];
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = buf[c * n + k];
                    }
                }
                col += width;
            }
        }
    }
}

/// Applies the centered transform along every axis of a hypercube of side `n`.
pub fn transform_all_axes(
    data: &mut [Complex64],
    n: usize,
    dims: usize,
    direction: Direction,
    scale_per_axis: f64,
) {
    let fft = CenteredFft::new(n, direction);
    let shape = vec![n; dims];
    for axis in 0..dims {
        fft.process_axis(data, &shape, axis, scale_per_axis);
    }
}
