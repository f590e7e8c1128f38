//! Streaming accumulation of measurement autocorrelations and their debiasing
//! into estimates of the target invariants.
//!
//! 1D measurements use the cyclic autocorrelation (copies obey the periodic
//! separation condition). 2D micrographs are zero-extended and only lags in
//! the support of `S_F` are accumulated ([`autocorr3_2d_masked`]); outside it
//! the statistic contains no single-copy terms.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariants::{autocorr3_1d, autocorr3_2d_masked, in_support_2d, lag_index_1d, BinMap, InvariantTensor2D};
use crate::lattice::{fft4, signed, wrap2};
use crate::model::Micrograph;

/// Running sums over a stream of micrographs sharing `(dim, m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    pub dim: u8,
    pub m: usize,
    pub n: usize,
    pub count: u64,
    /// Sum of the autocorrelation tensors (lag layout of [`crate::invariants`]).
    pub sum_a: Vec<f64>,
    pub sum_pix: f64,
    pub sum_pix2: f64,
    pub pixel_count: u64,
}

impl MomentAccumulator {
    pub fn empty(dim: u8, m: usize, n: usize) -> Result<Self> {
        let size = match dim {
            1 => 16 * n * n,
            2 => (4 * n).pow(4),
            _ => return Err(Error::invalid(format!("dim must be 1 or 2, got {dim}"))),
        };
        Ok(Self {
            dim,
            m,
            n,
            count: 0,
            sum_a: vec![0.0; size],
            sum_pix: 0.0,
            sum_pix2: 0.0,
            pixel_count: 0,
        })
    }

    fn check(&self, micrograph: &Micrograph) -> Result<()> {
        if micrograph.dim != self.dim || micrograph.m != self.m {
            return Err(Error::ShapeMismatch {
                expected: format!("{}D measurement with m = {}", self.dim, self.m),
                actual: format!("{}D with m = {}", micrograph.dim, micrograph.m),
            });
        }
        if micrograph.pixels.len() != self.m.pow(self.dim as u32) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pixels", self.m.pow(self.dim as u32)),
                actual: format!("{}", micrograph.pixels.len()),
            });
        }
        Ok(())
    }

    fn statistic(&self, micrograph: &Micrograph) -> Result<Vec<f64>> {
        self.check(micrograph)?;
        if self.dim == 1 {
            autocorr3_1d(micrograph, self.n)
        } else {
            autocorr3_2d_masked(micrograph, self.n)
        }
    }

    fn add(&mut self, micrograph: &Micrograph, a: &[f64]) {
        for (s, x) in self.sum_a.iter_mut().zip(a) {
            *s += x;
        }
        self.sum_pix += micrograph.pixels.iter().sum::<f64>();
        self.sum_pix2 += micrograph.pixels.iter().map(|x| x * x).sum::<f64>();
        self.pixel_count += micrograph.pixels.len() as u64;
        self.count += 1;
    }

    pub fn absorb(&mut self, micrograph: &Micrograph) -> Result<()> {
        let a = self.statistic(micrograph)?;
        self.add(micrograph, &a);
        Ok(())
    }

    /// Absorbs a batch in order. 1D statistics are computed concurrently; 2D
    /// ones are parallel internally.
    pub fn absorb_all(&mut self, micrographs: &[Micrograph]) -> Result<()> {
        if self.dim == 1 {
            let stats: Vec<Vec<f64>> = micrographs
                .par_iter()
                .map(|mic| self.statistic(mic))
                .collect::<Result<_>>()?;
            for (mic, a) in micrographs.iter().zip(&stats) {
                self.add(mic, a);
            }
        } else {
            for mic in micrographs {
                self.absorb(mic)?;
            }
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if (self.dim, self.m, self.n) != (other.dim, other.m, other.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("dim {}, m {}, n {}", self.dim, self.m, self.n),
                actual: format!("dim {}, m {}, n {}", other.dim, other.m, other.n),
            });
        }
        Ok(Self {
            dim: self.dim,
            m: self.m,
            n: self.n,
            count: self.count + other.count,
            sum_a: self.sum_a.iter().zip(&other.sum_a).map(|(a, b)| a + b).collect(),
            sum_pix: self.sum_pix + other.sum_pix,
            sum_pix2: self.sum_pix2 + other.sum_pix2,
            pixel_count: self.pixel_count + other.pixel_count,
        })
    }

    /// `Ā = sum_A / count`.
    pub fn mean_a(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::invalid("no measurements accumulated"));
        }
        let c = self.count as f64;
        Ok(self.sum_a.iter().map(|x| x / c).collect())
    }

    pub fn pixel_mean(&self) -> f64 {
        if self.pixel_count == 0 {
            0.0
        } else {
            self.sum_pix / self.pixel_count as f64
        }
    }

    /// Pixel variance; close to `σ²` when the noise dominates.
    pub fn pixel_variance(&self) -> f64 {
        if self.pixel_count == 0 {
            return 0.0;
        }
        let mu = self.pixel_mean();
        self.sum_pix2 / self.pixel_count as f64 - mu * mu
    }
}

/// Estimates `(V̂, T̂)` from 1D measurements of density `γ` and noise level `σ`:
/// `T̂ = mean(M)/(2γ)` and `V̂ = (Ā − 2γT̂σ²(δ(x₁−x₂) + δ(x₁) + δ(x₂))) / (2γ)`.
pub fn debias_1d(acc: &MomentAccumulator, sigma: f64, gamma: f64) -> Result<(Vec<f64>, f64)> {
    if acc.dim != 1 {
        return Err(Error::invalid("debias_1d needs a 1D accumulator"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("density must be positive, got {gamma}")));
    }
    let n = acc.n;
    let mut a = acc.mean_a()?;
    let t_hat = acc.pixel_mean() / (2.0 * gamma);
    let bias = 2.0 * gamma * t_hat * sigma * sigma;
    let half = 2 * n as i64;
    for x in -half..half {
        a[lag_index_1d(x, x, n)] -= bias;
        a[lag_index_1d(0, x, n)] -= bias;
        a[lag_index_1d(x, 0, n)] -= bias;
    }
    let scale = 1.0 / (2.0 * gamma);
    Ok((a.iter().map(|x| x * scale).collect(), t_hat))
}

/// Estimates `Ŝ` (on the scale of an `angle_count`-angle forward model) from 2D
/// micrographs of density `γ`. The noise bias `σ² · mean(M)` is removed on the
/// lines `x₁ = 0`, `x₂ = 0`, `x₁ = x₂` before transforming.
pub fn debias_2d(acc: &MomentAccumulator, sigma: f64, gamma: f64, angle_count: usize) -> Result<InvariantTensor2D> {
    if acc.dim != 2 {
        return Err(Error::invalid("debias_2d needs a 2D accumulator"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("density must be positive, got {gamma}")));
    }
    let n = acc.n;
    let len = 4 * n;
    let area = len * len;
    let mean_a = acc.mean_a()?;
    let bias = sigma * sigma * acc.pixel_mean();
    let mut lag: Vec<Complex64> = vec![Complex64::default(); area * area];
    for i in 0..area {
        let x1 = (signed(i / len, len), signed(i % len, len));
        for j in 0..area {
            let x2 = (signed(j / len, len), signed(j % len, len));
            if !in_support_2d(x1, x2, n) {
                continue;
            }
            let mut value = mean_a[i * area + j];
            let lines = (x1 == (0, 0)) as u8 + (x2 == (0, 0)) as u8 + (x1 == x2) as u8;
            value -= bias * lines as f64;
            lag[i * area + j] = Complex64::new(value, 0.0);
        }
    }
    fft4(&mut lag, len, false);
    let scale = (n * n * angle_count) as f64 / gamma;
    lag.iter_mut().for_each(|z| *z *= scale);
    Ok(InvariantTensor2D {
        n,
        values: lag,
        mu: acc.pixel_mean() / (16.0 * gamma),
    })
}

/// `out[T] = Σ_{(k₁,k₂) ∈ I_T} tensor(k₁, k₂)`.
pub fn bin_reduce(tensor: &InvariantTensor2D, map: &BinMap) -> Result<Vec<Complex64>> {
    if tensor.n != map.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("tensor with n = {}", map.n()),
            actual: format!("n = {}", tensor.n),
        });
    }
    map.reduce(&tensor.values)
}

/// `‖a − b‖ / ‖b‖` for binned vectors.
pub fn relative_error(estimate: &[Complex64], truth: &[Complex64]) -> f64 {
    let num: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = truth.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Lag index helper re-exported for the real-space view of 2D tensors.
pub fn lag_index_2d(x1: (i64, i64), x2: (i64, i64), n: usize) -> usize {
    let len = 4 * n;
    wrap2(x1.0, x1.1, len) * len * len + wrap2(x2.0, x2.1, len)
}
