use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::wrap;
use crate::model::{Micrograph, TargetSignal1D};

/// Shift-invariant moments of a 1D target.
#[derive(Debug, Clone, PartialEq)]
pub struct Invariant1D {
    pub n: usize,
    pub t: f64,
    /// `U(x₁)` at `wrap(x₁, 4n)`.
    pub u: Vec<f64>,
    /// `V(x₁, x₂)`, see [`lag_index_1d`].
    pub v: Vec<f64>,
}

impl Invariant1D {
    pub fn of(f: &TargetSignal1D) -> Self {
        Self {
            n: f.n(),
            t: mean_t(f),
            u: auto2_u(f),
            v: auto3_v(f),
        }
    }
}

/// Storage index of the lag pair `(x₁, x₂)` in a `4n × 4n` array.
#[inline]
pub fn lag_index_1d(x1: i64, x2: i64, n: usize) -> usize {
    let len = 4 * n;
    wrap(x1, len) * len + wrap(x2, len)
}

/// `T_F = (2n)⁻¹ Σ F(x)`.
pub fn mean_t(f: &TargetSignal1D) -> f64 {
    f.values().iter().sum::<f64>() / (2 * f.n()) as f64
}

/// The `2n` cyclic rotations of `F`, each zero-padded to length `4n` and
/// stored over `{−2n, …, 2n − 1}` in natural order.
fn padded_rotations(f: &TargetSignal1D) -> Vec<Vec<f64>> {
    let n = f.n() as i64;
    (-n..n)
        .map(|tau| {
            let mut out = vec![0.0; 4 * f.n()];
            for x in -n..n {
                let src = crate::model::centered_mod(x + tau, f.n());
                out[(x + 2 * n) as usize] = f.at(src);
            }
            out
        })
        .collect()
}

/// `U_F(x₁) = (2n)⁻¹ Σ_τ (2n)⁻¹ Σ_x F_τ(x) F_τ(x + x₁)`, stored at `wrap(x₁, 4n)`.
pub fn auto2_u(f: &TargetSignal1D) -> Vec<f64> {
    let n = f.n();
    let len = 4 * n;
    let norm = 1.0 / (4 * n * n) as f64;
    let mut out = vec![0.0; len];
    for g in padded_rotations(f) {
        for x1 in -(2 * n as i64)..2 * n as i64 {
            let mut s = 0.0;
            for (i, &a) in g.iter().enumerate() {
                let j = i as i64 + x1;
                if a != 0.0 && (0..len as i64).contains(&j) {
                    s += a * g[j as usize];
                }
            }
            out[wrap(x1, len)] += s * norm;
        }
    }
    out
}

/// `V_F(x₁, x₂) = (2n)⁻¹ Σ_τ (2n)⁻¹ Σ_x F_τ(x) F_τ(x + x₁) F_τ(x + x₂)`.
pub fn auto3_v(f: &TargetSignal1D) -> Vec<f64> {
    let n = f.n();
    let len = 4 * n as i64;
    let norm = 1.0 / (4 * n * n) as f64;
    let mut out = vec![0.0; (len * len) as usize];
    let lags = -(2 * n as i64)..2 * n as i64;
    for g in padded_rotations(f) {
        let at = |j: i64| if (0..len).contains(&j) { g[j as usize] } else { 0.0 };
        for x1 in lags.clone() {
            for x2 in x1..2 * n as i64 {
                let mut s = 0.0;
                for (i, &a) in g.iter().enumerate() {
                    if a != 0.0 {
                        let i = i as i64;
                        s += a * at(i + x1) * at(i + x2);
                    }
                }
                out[lag_index_1d(x1, x2, n)] += s * norm;
            }
        }
    }
    symmetrize_lower(&mut out, n);
    out
}

/// Copies `(x₁, x₂)` with `x₁ ≤ x₂` onto `(x₂, x₁)`.
fn symmetrize_lower(out: &mut [f64], n: usize) {
    let half = 2 * n as i64;
    for x1 in -half..half {
        for x2 in x1 + 1..half {
            out[lag_index_1d(x2, x1, n)] = out[lag_index_1d(x1, x2, n)];
        }
    }
}

/// `Σ_x p(x) M((x + s) mod m)` for `0 ≤ s < m`.
fn rolled_dot(p: &[f64], m: &[f64], s: usize) -> f64 {
    let len = m.len();
    let head: f64 = p[..len - s].iter().zip(&m[s..]).map(|(a, b)| a * b).sum();
    let tail: f64 = p[len - s..].iter().zip(&m[..s]).map(|(a, b)| a * b).sum();
    head + tail
}

/// `A_M(x₁, x₂) = m⁻¹ Σ_x M(x) M(x + x₁ mod m) M(x + x₂ mod m)` over the lag
/// window `{−2n, …, 2n − 1}²`.
pub fn autocorr3_1d(micrograph: &Micrograph, n: usize) -> Result<Vec<f64>> {
    if micrograph.dim != 1 {
        return Err(Error::invalid("autocorr3_1d needs a 1D measurement"));
    }
    let m = micrograph.m;
    if n == 0 || m < 4 * n {
        return Err(Error::invalid(format!("measurement length {m} is shorter than 4n")));
    }
    let data = &micrograph.pixels;
    let half = 2 * n as i64;
    let rows: Vec<Vec<f64>> = (-half..half)
        .into_par_iter()
        .map(|x1| {
            let s1 = x1.rem_euclid(m as i64) as usize;
            let p: Vec<f64> = (0..m).map(|x| data[x] * data[(x + s1) % m]).collect();
            (x1..half)
                .map(|x2| rolled_dot(&p, data, x2.rem_euclid(m as i64) as usize) / m as f64)
                .collect()
        })
        .collect();
    let mut out = vec![0.0; 16 * n * n];
    for (r, x1) in rows.iter().zip(-half..half) {
        for (value, x2) in r.iter().zip(x1..half) {
            out[lag_index_1d(x1, x2, n)] = *value;
        }
    }
    symmetrize_lower(&mut out, n);
    Ok(out)
}
