//! Steerable basis of Dirichlet Laplacian eigenfunctions on the unit disc.
//!
//! `ψ_{ν,q}(r, θ) = J_ν(λ_{|ν|,q} r) e^{iνθ}` for `ν ∈ ℤ`, where `λ_{|ν|,q}` is the
//! `q`-th positive root of `J_{|ν|}` and `J_{−ν} = (−1)^ν J_ν`. The disc is
//! sampled on the grid `𝒳 = {−2n, …, 2n − 1}²` through `x ↦ x / n`, with exact
//! zeros at `|x| ≥ n`. Grids are stored in FFT order (see [`crate::lattice`]).
//!
//! A real image has coefficients with `α_{−ν,q} = (−1)^ν conj(α_{ν,q})`; such
//! a vector is described by exactly `d` real numbers (see
//! [`CoeffVector::to_real_params`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bessel;
use crate::error::{Error, Result};
use crate::lattice::{signed, Fft2};

/// One basis element `(ν, q)` with its radial frequency `λ_{|ν|,q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisIndex {
    pub order: i32,
    pub radial: u32,
    pub root: f64,
}

/// How many eigenfunctions to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisSize {
    /// The first `d` eigenfunctions; a `±ν` pair cut by `d` is kept whole.
    Count(usize),
    /// Every eigenfunction with `λ_{|ν|,q} ≤ λ`.
    Bandlimit(f64),
}

#[derive(Debug, Clone)]
pub struct DiscBasis {
    n: usize,
    bandlimit: f64,
    indices: Vec<BasisIndex>,
    partner: Vec<usize>,
    max_order: u32,
    psi: Vec<Vec<Complex64>>,
    psi_hat: Vec<Vec<Complex64>>,
    norms: Vec<f64>,
}

/// Real image on the wrapped `4n × 4n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub n: usize,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; 16 * n * n],
        }
    }

    pub fn side(&self) -> usize {
        4 * self.n
    }

    pub fn at(&self, x: i64, y: i64) -> f64 {
        self.values[crate::lattice::wrap2(x, y, self.side())]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Expansion coefficients aligned with a basis' index list.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub values: Vec<Complex64>,
}

/// Ordering key: root ascending, then smaller `|ν|`, then `ν > 0` before `ν < 0`.
fn order_key(a: &BasisIndex, b: &BasisIndex) -> std::cmp::Ordering {
    a.root
        .total_cmp(&b.root)
        .then(a.order.unsigned_abs().cmp(&b.order.unsigned_abs()))
        .then(b.order.cmp(&a.order))
        .then(a.radial.cmp(&b.radial))
}

/// The sorted index list 𝒱 for a requested size.
pub fn enumerate_indices(size: BasisSize) -> Result<Vec<BasisIndex>> {
    let limit = match size {
        BasisSize::Count(0) => return Err(Error::invalid("basis needs at least one function")),
        // Weyl: about λ²/4 eigenfunctions below λ; pad generously.
        BasisSize::Count(d) => 2.0 * (d as f64).sqrt() + 12.0,
        BasisSize::Bandlimit(l) => {
            let first = bessel::bessel_roots(0, 1)?[0];
            if l.is_nan() || l < first {
                return Err(Error::invalid(format!(
                    "bandlimit {l} is below the first eigenvalue {first}"
                )));
            }
            l
        }
    };
    let mut all = Vec::new();
    for (nu, q, root) in bessel::roots_below(limit) {
        all.push(BasisIndex {
            order: nu as i32,
            radial: q,
            root,
        });
        if nu > 0 {
            all.push(BasisIndex {
                order: -(nu as i32),
                radial: q,
                root,
            });
        }
    }
    all.sort_by(order_key);
    if let BasisSize::Count(d) = size {
        let mut keep = d.min(all.len());
        if keep < all.len() && keep > 0 && all[keep - 1].order > 0 {
            keep += 1;
        }
        all.truncate(keep);
    }
    Ok(all)
}

impl DiscBasis {
    /// Builds the basis sampled on the grid of radius `n`.
    pub fn build(n: usize, size: BasisSize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid radius n must be positive"));
        }
        let indices = enumerate_indices(size)?;
        Self::from_indices(n, indices, size)
    }

    fn from_indices(n: usize, indices: Vec<BasisIndex>, size: BasisSize) -> Result<Self> {
        let side = 4 * n;
        let bandlimit = match size {
            BasisSize::Bandlimit(l) => l,
            BasisSize::Count(_) => indices.last().map(|i| i.root).unwrap_or(0.0),
        };
        let max_order = indices.iter().map(|i| i.order.unsigned_abs()).max().unwrap_or(0);
        let partner = indices
            .iter()
            .map(|a| {
                indices
                    .iter()
                    .position(|b| b.order == -a.order && b.radial == a.radial)
                    .ok_or_else(|| Error::invalid("basis is not closed under ν → −ν"))
            })
            .collect::<Result<Vec<_>>>()?;
        let fft = Fft2::forward(side, side);
        let mut scratch = Vec::new();
        let mut psi = Vec::with_capacity(indices.len());
        let mut psi_hat = Vec::with_capacity(indices.len());
        let mut norms = Vec::with_capacity(indices.len());
        for idx in &indices {
            let grid = sample_eigenfunction(n, idx);
            norms.push(grid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
            let mut hat = grid.clone();
            fft.process(&mut hat, &mut scratch);
            psi.push(grid);
            psi_hat.push(hat);
        }
        Ok(Self {
            n,
            bandlimit,
            indices,
            partner,
            max_order,
            psi,
            psi_hat,
            norms,
        })
    }

    /// Rebuilds a basis from a cached index list and DFT table.
    pub fn from_cache(
        n: usize,
        bandlimit: f64,
        indices: Vec<BasisIndex>,
        psi_hat: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let side = 4 * n;
        if psi_hat.len() != indices.len() || psi_hat.iter().any(|t| t.len() != side * side) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} tables of {}", indices.len(), side * side),
                actual: format!("{} tables", psi_hat.len()),
            });
        }
        let mut basis = Self::from_indices(n, indices, BasisSize::Bandlimit(bandlimit))?;
        basis.psi_hat = psi_hat;
        Ok(basis)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length `4n` of the grid 𝒳.
    pub fn side(&self) -> usize {
        4 * self.n
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn bandlimit(&self) -> f64 {
        self.bandlimit
    }

    /// `N = max |ν|`.
    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    /// Position of `(−ν, q)` for every element.
    pub fn partners(&self) -> &[usize] {
        &self.partner
    }

    /// Sampled eigenfunction `Ψ_{ν,q}` on the wrapped grid.
    pub fn psi(&self, i: usize) -> &[Complex64] {
        &self.psi[i]
    }

    /// DFT `Ψ̂_{ν,q}` on the wrapped grid.
    pub fn psi_hat(&self, i: usize) -> &[Complex64] {
        &self.psi_hat[i]
    }

    /// Discrete ℓ² norm of each sampled eigenfunction.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn zero_coeffs(&self) -> CoeffVector {
        CoeffVector {
            values: vec![Complex64::default(); self.dim()],
        }
    }

    pub fn one_hot(&self, order: i32, radial: u32) -> Option<CoeffVector> {
        let pos = self
            .indices
            .iter()
            .position(|i| i.order == order && i.radial == radial)?;
        let mut v = self.zero_coeffs();
        v.values[pos] = Complex64::new(1.0, 0.0);
        Some(v)
    }

    /// Random real-image coefficients with i.i.d. standard normal parameters.
    pub fn random_coeffs<R: Rng + ?Sized>(&self, rng: &mut R) -> CoeffVector {
        let params: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        CoeffVector::from_real_params(self, &params)
    }

    /// Largest violation of `α_{−ν,q} = (−1)^ν conj(α_{ν,q})`.
    pub fn real_constraint_residual(&self, v: &CoeffVector) -> f64 {
        self.indices
            .iter()
            .enumerate()
            .map(|(i, idx)| {
                let j = self.partner[i];
                (v.values[j] - parity(idx.order) * v.values[i].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    fn check_len(&self, v: &CoeffVector) -> Result<()> {
        if v.values.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", self.dim()),
                actual: format!("{}", v.values.len()),
            });
        }
        Ok(())
    }

    /// `F(x) = Σ α_{ν,q} Ψ_{ν,q}(x)` on the grid. Rejects coefficients that do
    /// not describe a real image.
    pub fn render(&self, v: &CoeffVector) -> Result<ImageGrid> {
        self.check_len(v)?;
        let scale = v.norm().max(f64::MIN_POSITIVE);
        if self.real_constraint_residual(v) > 1e-10 * scale {
            return Err(Error::invalid("coefficients violate the real-image constraint"));
        }
        let side = self.side();
        let mut acc = vec![Complex64::default(); side * side];
        for (alpha, psi) in v.values.iter().zip(&self.psi) {
            if *alpha == Complex64::default() {
                continue;
            }
            for (a, p) in acc.iter_mut().zip(psi) {
                *a += alpha * p;
            }
        }
        Ok(ImageGrid {
            n: self.n,
            values: acc.into_iter().map(|z| z.re).collect(),
        })
    }

    /// Least-squares coefficients of `grid` against the sampled eigenfunctions
    /// over the pixels `|x| < n`.
    pub fn project(&self, grid: &ImageGrid) -> Result<CoeffVector> {
        if grid.n != self.n || grid.values.len() != self.side() * self.side() {
            return Err(Error::ShapeMismatch {
                expected: format!("grid with n = {}", self.n),
                actual: format!("n = {}", grid.n),
            });
        }
        let side = self.side();
        let support: Vec<usize> = (0..side * side)
            .filter(|&k| {
                let (x, y) = (signed(k / side, side), signed(k % side, side));
                ((x * x + y * y) as f64).sqrt() < self.n as f64
            })
            .collect();
        let d = self.dim();
        if d > support.len() {
            return Err(Error::Projection(format!(
                "{d} basis functions exceed the {} pixels in the disc",
                support.len()
            )));
        }
        // Normalized columns keep the Gram matrix well scaled.
        let cols: Vec<Vec<Complex64>> = (0..d)
            .map(|i| {
                let s = 1.0 / self.norms[i];
                support.iter().map(|&k| self.psi[i][k] * s).collect()
            })
            .collect();
        let gram = DMatrix::from_fn(d, d, |i, j| {
            cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
        });
        let rhs = nalgebra::DVector::from_fn(d, |i, _| {
            cols[i]
                .iter()
                .zip(&support)
                .map(|(a, &k)| a.conj() * grid.values[k])
                .sum::<Complex64>()
        });
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Projection("Gram matrix is not positive definite".into()))?;
        let min_pivot = (0..d).map(|i| chol.l_dirty()[(i, i)].re).fold(f64::INFINITY, f64::min);
        if min_pivot * min_pivot < 1e-12 {
            return Err(Error::Projection(format!(
                "Gram matrix is numerically rank deficient (pivot {min_pivot:e})"
            )));
        }
        let sol = chol.solve(&rhs);
        let mut values: Vec<Complex64> = (0..d).map(|i| sol[i] / self.norms[i]).collect();
        // Symmetrize so the result is exactly a real image.
        let raw = values.clone();
        for (i, idx) in self.indices.iter().enumerate() {
            let j = self.partner[i];
            values[i] = 0.5 * (raw[i] + parity(idx.order) * raw[j].conj());
        }
        Ok(CoeffVector { values })
    }

    /// Continuous evaluation of `f(r, θ) = Σ α ψ_{ν,q}(r, θ)` (real part).
    pub fn eval_continuous(&self, v: &CoeffVector, r: f64, theta: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        self.indices
            .iter()
            .zip(&v.values)
            .map(|(idx, a)| {
                let radial = bessel::j_signed(idx.order, idx.root * r);
                (a * Complex64::from_polar(radial, idx.order as f64 * theta)).re
            })
            .sum()
    }
}

/// `(−1)^ν` as a complex scalar.
#[inline]
pub(crate) fn parity(order: i32) -> f64 {
    if order % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn sample_eigenfunction(n: usize, idx: &BasisIndex) -> Vec<Complex64> {
    let side = 4 * n;
    let mut out = vec![Complex64::default(); side * side];
    let nf = n as f64;
    for (k, slot) in out.iter_mut().enumerate() {
        let (x, y) = (signed(k / side, side) as f64, signed(k % side, side) as f64);
        let r = (x * x + y * y).sqrt() / nf;
        if r >= 1.0 {
            continue;
        }
        let theta = y.atan2(x);
        let radial = bessel::j_signed(idx.order, idx.root * r);
        *slot = Complex64::from_polar(radial, idx.order as f64 * theta);
    }
    out
}

impl CoeffVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// Rotation by `φ`: `α_{ν,q} ↦ α_{ν,q} e^{iνφ}`.
    pub fn steer(&self, basis: &DiscBasis, angle: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(basis.indices())
                .map(|(a, idx)| a * Complex64::from_polar(1.0, idx.order as f64 * angle))
                .collect(),
        }
    }

    /// The `d` real degrees of freedom of a real-image coefficient vector, in
    /// basis order: `Re α` for `ν = 0`, `(Re α, Im α)` for `ν > 0`.
    pub fn to_real_params(&self, basis: &DiscBasis) -> Vec<f64> {
        let mut out = Vec::with_capacity(basis.dim());
        for (a, idx) in self.values.iter().zip(basis.indices()) {
            match idx.order.cmp(&0) {
                std::cmp::Ordering::Equal => out.push(a.re),
                std::cmp::Ordering::Greater => {
                    out.push(a.re);
                    out.push(a.im);
                }
                std::cmp::Ordering::Less => {}
            }
        }
        out
    }

    /// Inverse of [`CoeffVector::to_real_params`].
    pub fn from_real_params(basis: &DiscBasis, params: &[f64]) -> Self {
        let mut values = vec![Complex64::default(); basis.dim()];
        let mut it = params.iter();
        for (i, idx) in basis.indices().iter().enumerate() {
            match idx.order.cmp(&0) {
                std::cmp::Ordering::Equal => {
                    values[i] = Complex64::new(*it.next().unwrap(), 0.0);
                }
                std::cmp::Ordering::Greater => {
                    let re = *it.next().unwrap();
                    let im = *it.next().unwrap();
                    values[i] = Complex64::new(re, im);
                    values[basis.partners()[i]] = parity(idx.order) * Complex64::new(re, -im);
                }
                std::cmp::Ordering::Less => {}
            }
        }
        Self { values }
    }
}

/// Maps a Wirtinger-style gradient `h_i = Σ conj(r) ∂Ŝ/∂α_i` to the gradient
/// with respect to the real parameters of [`CoeffVector::to_real_params`].
pub(crate) fn real_param_gradient(basis: &DiscBasis, h: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(basis.dim());
    for (i, idx) in basis.indices().iter().enumerate() {
        let s = parity(idx.order);
        match idx.order.cmp(&0) {
            std::cmp::Ordering::Equal => out.push(h[i].re),
            std::cmp::Ordering::Greater => {
                let hp = h[basis.partners()[i]];
                out.push(h[i].re + s * hp.re);
                out.push(-h[i].im + s * hp.im);
            }
            std::cmp::Ordering::Less => {}
        }
    }
    out
}

/// Two-dimensional DFT on 𝒳: `ĝ(k) = Σ_x g(x) e^{−2πi x·k / 4n}`.
pub fn dft_grid(values: &[Complex64], side: usize) -> Vec<Complex64> {
    let mut out = values.to_vec();
    Fft2::forward(side, side).process(&mut out, &mut Vec::new());
    out
}

/// Inverse of [`dft_grid`] (including the `1/(4n)²` factor).
pub fn idft_grid(values: &[Complex64], side: usize) -> Vec<Complex64> {
    let mut out = values.to_vec();
    Fft2::inverse(side, side).process(&mut out, &mut Vec::new());
    let s = 1.0 / (side * side) as f64;
    out.iter_mut().for_each(|z| *z *= s);
    out
}
