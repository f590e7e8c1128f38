//! Index conventions for periodic grids.
//!
//! Arrays over `{−L/2, …, L/2 − 1}` (per axis) are stored in FFT order: the
//! element for signed coordinate `x` lives at `x mod L`. A square grid of side
//! `L` is row-major with the first coordinate as the row.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Position of signed coordinate `x` in an FFT-ordered axis of length `len`.
#[inline]
pub fn wrap(x: i64, len: usize) -> usize {
    x.rem_euclid(len as i64) as usize
}

/// Signed representative in `{−len/2, …, len/2 − 1}` of storage index `i`.
#[inline]
pub fn signed(i: usize, len: usize) -> i64 {
    let half = len / 2;
    if i >= half {
        i as i64 - len as i64
    } else {
        i as i64
    }
}

/// Flat index of `(x, y)` on a wrapped `len × len` grid.
#[inline]
pub fn wrap2(x: i64, y: i64, len: usize) -> usize {
    wrap(x, len) * len + wrap(y, len)
}

/// Flat index of `−a − b` for two flat indices on a `len × len` grid.
#[inline]
pub fn neg_sum2(a: usize, b: usize, len: usize) -> usize {
    let (ar, ac) = (a / len, a % len);
    let (br, bc) = (b / len, b % len);
    let r = (2 * len - ar - br) % len;
    let c = (2 * len - ac - bc) % len;
    r * len + c
}

/// Flat index of `−a` on a `len × len` grid.
#[inline]
pub fn neg2(a: usize, len: usize) -> usize {
    let (r, c) = (a / len, a % len);
    ((len - r) % len) * len + (len - c) % len
}

/// In-place 2D DFT of a row-major `rows × cols` array.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn forward(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fft: planner.plan_fft_forward(cols),
            col_fft: planner.plan_fft_forward(rows),
        }
    }

    pub fn inverse(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fft: planner.plan_fft_inverse(cols),
            col_fft: planner.plan_fft_inverse(rows),
        }
    }

    /// Unnormalized transform; `scratch` must hold `rows` elements.
    pub fn process(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.rows * self.cols);
        self.row_fft.process(data);
        scratch.resize(self.rows, Complex64::default());
        for c in 0..self.cols {
            for r in 0..self.rows {
                scratch[r] = data[r * self.cols + c];
            }
            self.col_fft.process(scratch);
            for r in 0..self.rows {
                data[r * self.cols + c] = scratch[r];
            }
        }
    }
}

/// Forward DFT along every axis of a `len^4` array (axes in row-major order).
pub(crate) fn fft4(data: &mut [Complex64], len: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    assert_eq!(data.len(), len.pow(4));
    // Last axis is contiguous.
    fft.process(data);
    let mut line = vec![Complex64::default(); len];
    for stride in [len, len * len, len * len * len] {
        let block = stride * len;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + off + t * stride];
                }
                fft.process(&mut line);
                for (t, value) in line.iter().enumerate() {
                    data[base + off + t * stride] = *value;
                }
            }
        }
    }
}
