use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{CoeffVector, DiscBasis};
use crate::error::{Error, Result};
use crate::lattice::{wrap, Fft2};
use crate::model::{rotate1d, TargetSignal1D};

/// `B(k₁, k₂) = a_{k₁} a_{k₂} a_{−k₁−k₂}` for `k ∈ {−n, …, n − 1}`, stored at
/// `wrap(k₁, 2n)·2n + wrap(k₂, 2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bispectrum1D {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl Bispectrum1D {
    pub fn at(&self, k1: i64, k2: i64) -> Complex64 {
        let len = 2 * self.n;
        self.values[wrap(k1, len) * len + wrap(k2, len)]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// `‖self − other‖ / ‖other‖`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = other.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

/// `a_k = Σ_{x=−n}^{n−1} F(x) e^{−2πi xk/2n}` at `wrap(k, 2n)`.
fn spectrum(f: &TargetSignal1D) -> Vec<Complex64> {
    let n = f.n() as i64;
    let len = 2 * f.n();
    (0..len as i64)
        .map(|k| {
            (-n..n)
                .map(|x| {
                    let arg = -2.0 * PI * (x * k) as f64 / len as f64;
                    f.at(x) * Complex64::from_polar(1.0, arg)
                })
                .sum()
        })
        .collect()
}

/// Bispectrum computed from the DFT of `F`.
pub fn bispectrum_direct(f: &TargetSignal1D) -> Bispectrum1D {
    let a = spectrum(f);
    let len = 2 * f.n();
    let mut values = Vec::with_capacity(len * len);
    for k1 in 0..len {
        for k2 in 0..len {
            values.push(a[k1] * a[k2] * a[(2 * len - k1 - k2) % len]);
        }
    }
    Bispectrum1D { n: f.n(), values }
}

/// Bispectrum from the third-order invariant: `B(k₁, k₂) = 2n · V̂(2k₁, 2k₂)`
/// where `V̂` is the `4n × 4n` DFT of `V`.
pub fn bispectrum_from_v(v: &[f64], n: usize) -> Result<Bispectrum1D> {
    let len = 4 * n;
    if n == 0 || v.len() != len * len {
        return Err(Error::ShapeMismatch {
            expected: format!("{} lag values", len * len),
            actual: format!("{}", v.len()),
        });
    }
    let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Fft2::forward(len, len).process(&mut data, &mut Vec::new());
    let half = 2 * n;
    let mut values = Vec::with_capacity(half * half);
    for k1 in 0..half {
        for k2 in 0..half {
            values.push(data[2 * k1 * len + 2 * k2] * (2 * n) as f64);
        }
    }
    Ok(Bispectrum1D { n, values })
}

/// How phases are read off the bispectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMethod {
    /// `φ_{k+1} = φ_k + φ_1 − arg B(k, 1)`, exact for noiseless input.
    #[default]
    Recursive,
    /// `φ_k = arg Σ_{k₁+k₂=k} e^{i(φ_{k₁}+φ_{k₂})} conj B(k₁, k₂)`, which weights
    /// every decomposition of `k` by its magnitude; better for noisy input.
    Averaged,
}

/// Recovers `F` up to a cyclic shift from its bispectrum.
pub fn invert_bispectrum(b: &Bispectrum1D, method: PhaseMethod) -> Result<TargetSignal1D> {
    let n = b.n;
    let len = 2 * n;
    if b.values.len() != len * len {
        return Err(Error::ShapeMismatch {
            expected: format!("{} entries", len * len),
            actual: format!("{}", b.values.len()),
        });
    }
    if b.values.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("bispectrum entries must be finite"));
    }
    let peak = b.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 1e-9 * peak;
    let b00 = b.at(0, 0);
    if peak == 0.0 || b00.norm() < floor {
        return Err(Error::Inversion("B(0, 0) vanishes".into()));
    }
    let a0 = b00.re.cbrt();
    let ni = n as i64;
    let mut magnitude = vec![0.0; n + 1];
    for k in 1..=ni {
        let diag = b.at(k, -k);
        if diag.norm() < floor {
            return Err(Error::Inversion(format!("|a_{k}| vanishes")));
        }
        magnitude[k as usize] = (diag.re / a0).abs().sqrt();
    }
    let mut phase = vec![0.0; n + 1];
    match method {
        PhaseMethod::Recursive => {
            for k in 1..ni {
                let ku = k as usize;
                phase[ku + 1] = phase[ku] + phase[1] - b.at(k, 1).arg();
            }
        }
        PhaseMethod::Averaged => {
            for k in 2..=ni {
                let mut z = Complex64::default();
                for k1 in 1..k {
                    let k2 = k - k1;
                    let known = phase[k1 as usize] + phase[k2 as usize];
                    z += Complex64::from_polar(1.0, known) * b.at(k1, k2).conj();
                }
                phase[k as usize] = z.arg();
            }
        }
    }
    // φ₁ = 0 fixes the shift only up to a fraction of a sample; rotating so the
    // Nyquist coefficient is real lands on an integer shift.
    let tilt = -phase[n] / n as f64;
    let mut a = vec![Complex64::default(); len];
    a[0] = Complex64::new(a0, 0.0);
    for k in 1..n {
        let z = Complex64::from_polar(magnitude[k], phase[k] + k as f64 * tilt);
        a[k] = z;
        a[len - k] = z.conj();
    }
    a[n] = Complex64::new(magnitude[n], 0.0);
    let values: Vec<Complex64> = (-ni..ni)
        .map(|x| {
            let s: Complex64 = (0..len)
                .map(|k| a[k] * Complex64::from_polar(1.0, 2.0 * PI * (x * k as i64) as f64 / len as f64))
                .sum();
            s / len as f64
        })
        .collect();
    let scale = values
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let residue = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > 1e-6 * scale {
        return Err(Error::Inversion(format!(
            "reconstruction is not real (imaginary residue {residue:e})"
        )));
    }
    TargetSignal1D::new(n, values.iter().map(|z| z.re).collect())
}

/// `min_τ ‖F̂ − F_τ‖ / ‖F‖` over all cyclic shifts.
pub fn align_error_1d(estimate: &TargetSignal1D, truth: &TargetSignal1D) -> Result<f64> {
    if estimate.n() != truth.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("n = {}", truth.n()),
            actual: format!("n = {}", estimate.n()),
        });
    }
    let norm = truth.norm();
    if norm == 0.0 {
        return Err(Error::invalid("reference signal has zero norm"));
    }
    let n = truth.n() as i64;
    let mut best = f64::INFINITY;
    for tau in -n..n {
        let shifted = rotate1d(truth, tau)?;
        let d: f64 = estimate
            .values()
            .iter()
            .zip(shifted.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.min(d / norm);
    }
    Ok(best)
}

/// Rotation-aligned distance between two coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alignment2D {
    pub error: f64,
    pub angle: f64,
}

/// `min_φ ‖steer(v̂, φ) − v‖ / ‖v‖`: a 720-point grid search refined by a
/// golden-section search around the best grid angle.
pub fn align_error_2d(estimate: &CoeffVector, truth: &CoeffVector, basis: &DiscBasis) -> Result<Alignment2D> {
    if estimate.values.len() != basis.dim() || truth.values.len() != basis.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} coefficients", basis.dim()),
            actual: format!("{} and {}", estimate.values.len(), truth.values.len()),
        });
    }
    let norm = truth.norm();
    if norm == 0.0 {
        return Err(Error::invalid("reference coefficients have zero norm"));
    }
    let dist2 = |phi: f64| -> f64 {
        estimate
            .values
            .iter()
            .zip(&truth.values)
            .zip(basis.indices())
            .map(|((a, b), idx)| (a * Complex64::from_polar(1.0, idx.order as f64 * phi) - b).norm_sqr())
            .sum()
    };
    let grid = 720;
    let step = 2.0 * PI / grid as f64;
    let (mut best_phi, mut best) = (0.0, f64::INFINITY);
    for j in 0..grid {
        let phi = j as f64 * step;
        let d = dist2(phi);
        if d < best {
            best = d;
            best_phi = phi;
        }
    }
    let (mut lo, mut hi) = (best_phi - step, best_phi + step);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (dist2(c), dist2(d));
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = dist2(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = dist2(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    let refined = dist2(mid);
    let (angle, value) = if refined < best {
        (mid, refined)
    } else {
        (best_phi, best)
    };
    Ok(Alignment2D {
        error: value.max(0.0).sqrt() / norm,
        angle: angle.rem_euclid(2.0 * PI),
    })
}
