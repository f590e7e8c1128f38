use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{neg2, signed, wrap, wrap2, Fft2};
use crate::model::Micrograph;

/// Whether `(x₁, x₂)` lies in the support of a triple correlation of an image
/// vanishing outside the open disc of radius `n`: `|x₁|, |x₂|, |x₁ − x₂| < 2n`.
#[inline]
pub fn in_support_2d(x1: (i64, i64), x2: (i64, i64), n: usize) -> bool {
    let r2 = 4 * (n * n) as i64;
    let d = (x1.0 - x2.0, x1.1 - x2.1);
    x1.0 * x1.0 + x1.1 * x1.1 < r2 && x2.0 * x2.0 + x2.1 * x2.1 < r2 && d.0 * d.0 + d.1 * d.1 < r2
}

/// Smallest integer `≥ len` whose only prime factors are 2, 3 and 5.
fn smooth_size(len: usize) -> usize {
    let mut s = len.max(1);
    loop {
        let mut r = s;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return s;
        }
        s += 1;
    }
}

/// Cross-correlates `M(x)M(x + x₁)` with `M` for two lags per complex
/// transform, returning lag windows over 𝒳.
struct Correlator<'a> {
    m: usize,
    n: usize,
    size: usize,
    data: &'a [f64],
    spectrum: Vec<Complex64>,
    forward: Fft2,
    inverse: Fft2,
}

impl<'a> Correlator<'a> {
    fn new(micrograph: &'a Micrograph, n: usize) -> Self {
        let m = micrograph.m;
        // Padding by 2n keeps lags |x₂| ≤ 2n free of wraparound.
        let size = smooth_size(m + 2 * n);
        let forward = Fft2::forward(size, size);
        let inverse = Fft2::inverse(size, size);
        let mut spectrum = vec![Complex64::default(); size * size];
        for r in 0..m {
            for c in 0..m {
                spectrum[r * size + c] = Complex64::new(micrograph.pixels[r * m + c], 0.0);
            }
        }
        forward.process(&mut spectrum, &mut Vec::new());
        Self {
            m,
            n,
            size,
            data: &micrograph.pixels,
            spectrum,
            forward,
            inverse,
        }
    }

    fn product_into(&self, x1: (i64, i64), out: &mut [Complex64], imag: bool) {
        let m = self.m as i64;
        let r_lo = (-x1.0).max(0);
        let r_hi = (m - x1.0).min(m);
        let c_lo = (-x1.1).max(0);
        let c_hi = (m - x1.1).min(m);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let a = self.data[(r * m + c) as usize];
                let b = self.data[((r + x1.0) * m + c + x1.1) as usize];
                let slot = &mut out[r as usize * self.size + c as usize];
                if imag {
                    slot.im = a * b;
                } else {
                    slot.re = a * b;
                }
            }
        }
    }

    /// Windows `A(x₁ᵃ, ·)` and `A(x₁ᵇ, ·)` over 𝒳, already divided by `m²`.
    fn pair(&self, a: (i64, i64), b: Option<(i64, i64)>) -> (Vec<f64>, Vec<f64>) {
        let s = self.size;
        let mut z = vec![Complex64::default(); s * s];
        self.product_into(a, &mut z, false);
        if let Some(b) = b {
            self.product_into(b, &mut z, true);
        }
        let mut scratch = Vec::new();
        self.forward.process(&mut z, &mut scratch);
        // With Z = P_a + iP_b, Z̑(−k)·M̂(k) transforms back to C_a + iC_b.
        let mut y: Vec<Complex64> = (0..s * s).map(|k| z[neg2(k, s)] * self.spectrum[k]).collect();
        self.inverse.process(&mut y, &mut scratch);
        let len = 4 * self.n;
        let half = 2 * self.n as i64;
        let scale = 1.0 / ((s * s) as f64 * (self.m * self.m) as f64);
        let mut wa = vec![0.0; len * len];
        let mut wb = vec![0.0; len * len];
        for x2r in -half..half {
            for x2c in -half..half {
                let value = y[wrap(x2r, s) * s + wrap(x2c, s)] * scale;
                let dst = wrap2(x2r, x2c, len);
                wa[dst] = value.re;
                wb[dst] = value.im;
            }
        }
        (wa, wb)
    }

    /// Windows for every lag in `lags`, in order.
    fn windows(&self, lags: &[(i64, i64)]) -> Vec<Vec<f64>> {
        let pairs: Vec<&[(i64, i64)]> = lags.chunks(2).collect();
        let done: Vec<(Vec<f64>, Vec<f64>)> = pairs.par_iter().map(|p| self.pair(p[0], p.get(1).copied())).collect();
        let mut out = Vec::with_capacity(lags.len());
        for ((a, b), p) in done.into_iter().zip(&pairs) {
            out.push(a);
            if p.len() == 2 {
                out.push(b);
            }
        }
        out
    }
}

fn check_input(micrograph: &Micrograph, n: usize) -> Result<()> {
    if micrograph.dim != 2 {
        return Err(Error::invalid("autocorr3_2d needs a 2D micrograph"));
    }
    if n == 0 || micrograph.m < 8 * n {
        return Err(Error::invalid(format!(
            "micrograph side {} is smaller than 8n = {}",
            micrograph.m,
            8 * n
        )));
    }
    Ok(())
}

/// `A_M(x₁, x₂) = m⁻² Σ_{x ∈ ℤ²} M(x) M(x + x₁) M(x + x₂)` with `M` zero outside
/// the frame, for every `(x₁, x₂) ∈ 𝒳 × 𝒳`.
pub fn autocorr3_2d(micrograph: &Micrograph, n: usize) -> Result<Vec<f64>> {
    check_input(micrograph, n)?;
    let len = 4 * n;
    let lags: Vec<(i64, i64)> = (0..len * len)
        .map(|i| (signed(i / len, len), signed(i % len, len)))
        .collect();
    let engine = Correlator::new(micrograph, n);
    let rows = engine.windows(&lags);
    let mut out = vec![0.0; len.pow(4)];
    for (lag, row) in lags.iter().zip(rows) {
        let base = wrap2(lag.0, lag.1, len) * len * len;
        out[base..base + len * len].copy_from_slice(&row);
    }
    Ok(out)
}

/// [`autocorr3_2d`] restricted to the pairs accepted by [`in_support_2d`]
/// (zero elsewhere). Lags `−x₁` are filled from `A(−x₁, z) = A(x₁, z + x₁)`.
pub fn autocorr3_2d_masked(micrograph: &Micrograph, n: usize) -> Result<Vec<f64>> {
    check_input(micrograph, n)?;
    let len = 4 * n;
    let half = 2 * n as i64;
    let r2 = half * half;
    let lags: Vec<(i64, i64)> = (0..len * len)
        .map(|i| (signed(i / len, len), signed(i % len, len)))
        .filter(|&(a, b)| a * a + b * b < r2 && (a > 0 || (a == 0 && b >= 0)))
        .collect();
    let engine = Correlator::new(micrograph, n);
    let rows = engine.windows(&lags);
    let mut out = vec![0.0; len.pow(4)];
    for (&x1, row) in lags.iter().zip(&rows) {
        let base = wrap2(x1.0, x1.1, len) * len * len;
        let mirror = wrap2(-x1.0, -x1.1, len) * len * len;
        for x2r in -half..half {
            for x2c in -half..half {
                if !in_support_2d(x1, (x2r, x2c), n) {
                    continue;
                }
                let value = row[wrap2(x2r, x2c, len)];
                out[base + wrap2(x2r, x2c, len)] = value;
                // (−x₁, x₂ − x₁) is in the support exactly when (x₁, x₂) is.
                out[mirror + wrap2(x2r - x1.0, x2c - x1.1, len)] = value;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1034), 1080);
        assert_eq!(smooth_size(38), 40);
        assert_eq!(smooth_size(64), 64);
    }

    #[test]
    fn unit_spike() {
        let mut mic = Micrograph::zeros(2, 24);
        mic.pixels[5 * 24 + 9] = 1.0;
        let a = autocorr3_2d(&mic, 3).unwrap();
        let want = 1.0 / (24.0 * 24.0);
        assert!((a[0] - want).abs() < 1e-15);
        assert!(a[1..].iter().all(|x| x.abs() < 1e-15));
        let z = autocorr3_2d(&Micrograph::zeros(2, 24), 3).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn masked_agrees_inside_support() {
        let m = 40;
        let n = 3;
        let pixels: Vec<f64> = (0..m * m).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mic = Micrograph { dim: 2, m, pixels };
        let full = autocorr3_2d(&mic, n).unwrap();
        let masked = autocorr3_2d_masked(&mic, n).unwrap();
        let len = 4 * n;
        for i in 0..len * len {
            for j in 0..len * len {
                let x1 = (signed(i / len, len), signed(i % len, len));
                let x2 = (signed(j / len, len), signed(j % len, len));
                let k = i * len * len + j;
                if in_support_2d(x1, x2, n) {
                    assert!((full[k] - masked[k]).abs() < 1e-10, "{x1:?} {x2:?}");
                } else {
                    assert_eq!(masked[k], 0.0);
                }
            }
        }
    }
}
