use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{dft_grid, CoeffVector, DiscBasis};
use crate::error::{Error, Result};
use crate::lattice::{neg_sum2, signed};

/// Uniform rotation angles `φ_j = 2πj/K` with quadrature weight `6N/K`, so
/// every design approximates the same `6N`-angle sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDesign {
    angles: Vec<f64>,
    weight: f64,
}

impl AngularDesign {
    /// The `6N` angles that sample rotations at the Nyquist rate of a basis
    /// with maximal order `N` (at least 6 angles).
    pub fn nyquist(basis: &DiscBasis) -> Self {
        let count = Self::nyquist_count(basis);
        Self::uniform(count, 1.0)
    }

    pub fn nyquist_count(basis: &DiscBasis) -> usize {
        6 * (basis.max_order() as usize).max(1)
    }

    /// `count` angles, weighted by `6N/count`.
    pub fn with_count(basis: &DiscBasis, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("angular design needs at least one angle"));
        }
        let weight = Self::nyquist_count(basis) as f64 / count as f64;
        Ok(Self::uniform(count, weight))
    }

    fn uniform(count: usize, weight: f64) -> Self {
        let angles = (0..count).map(|j| 2.0 * PI * j as f64 / count as f64).collect();
        Self { angles, weight }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `u(φ_j, k)_i = Ψ̂_i(k) e^{iν_i φ_j}` for the flat frequency index `k`.
    pub fn u(&self, basis: &DiscBasis, j: usize, k: usize) -> Vec<Complex64> {
        basis
            .indices()
            .iter()
            .enumerate()
            .map(|(i, idx)| basis.psi_hat(i)[k] * Complex64::from_polar(1.0, idx.order as f64 * self.angles[j]))
            .collect()
    }
}

/// `Ŝ(k₁, k₂)` over `𝒳 × 𝒳` (flat index `k₁·(4n)² + k₂`) and the grid mean `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantTensor2D {
    pub n: usize,
    pub values: Vec<Complex64>,
    pub mu: f64,
}

impl InvariantTensor2D {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![Complex64::default(); (4 * n).pow(4)],
            mu: 0.0,
        }
    }

    pub fn side(&self) -> usize {
        4 * self.n
    }

    pub fn at(&self, k1: usize, k2: usize) -> Complex64 {
        let area = self.side() * self.side();
        self.values[k1 * area + k2]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − other‖ / ‖other‖`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diff / other.norm()
    }

    /// Largest `|Ŝ(k₁,k₂) − Ŝ(k₂,k₁)|` and `|Ŝ(−k₁,−k₂) − conj Ŝ(k₁,k₂)|`.
    pub fn symmetry_residuals(&self) -> (f64, f64) {
        let len = self.side();
        let area = len * len;
        let mut swap: f64 = 0.0;
        let mut herm: f64 = 0.0;
        for k1 in 0..area {
            let m1 = crate::lattice::neg2(k1, len);
            for k2 in 0..area {
                let m2 = crate::lattice::neg2(k2, len);
                let z = self.values[k1 * area + k2];
                swap = swap.max((z - self.values[k2 * area + k1]).norm());
                herm = herm.max((self.values[m1 * area + m2] - z.conj()).norm());
            }
        }
        (swap, herm)
    }
}

/// Direct evaluation: render every rotated copy, transform it, and sum
/// `F̂_φ(k₁) F̂_φ(k₂) F̂_φ(−k₁−k₂)` over the design.
pub fn s_hat_truth(basis: &DiscBasis, v: &CoeffVector, design: &AngularDesign) -> Result<InvariantTensor2D> {
    let len = basis.side();
    let area = len * len;
    let spectra: Vec<Vec<Complex64>> = design
        .angles()
        .iter()
        .map(|&phi| {
            let image = basis.render(&v.steer(basis, phi))?;
            let values: Vec<Complex64> = image.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            Ok(dft_grid(&values, len))
        })
        .collect::<Result<_>>()?;
    let image = basis.render(v)?;
    let mu = image.values.iter().sum::<f64>() / area as f64;
    let weight = design.weight();
    let values: Vec<Complex64> = (0..area)
        .into_par_iter()
        .flat_map_iter(|k1| {
            let spectra = &spectra;
            (0..area).map(move |k2| {
                let k3 = neg_sum2(k1, k2, len);
                let s: Complex64 = spectra.iter().map(|f| f[k1] * f[k2] * f[k3]).sum();
                s * weight
            })
        })
        .collect();
    Ok(InvariantTensor2D {
        n: basis.n(),
        values,
        mu,
    })
}

/// Orbits of frequency pairs under permutations of `(k₁, k₂, −k₁−k₂)`; `Ŝ` is
/// constant on each orbit.
#[derive(Debug, Clone)]
pub struct OrbitTable {
    side: usize,
    orbit_of: Vec<u32>,
    triples: Vec<[u32; 3]>,
    mult: Vec<u8>,
}

impl OrbitTable {
    pub fn build(side: usize) -> Self {
        let area = side * side;
        let total = area * area;
        let mut orbit_of = vec![u32::MAX; total];
        let mut triples = Vec::with_capacity(total / 6 + area);
        let mut mult = Vec::with_capacity(total / 6 + area);
        for a in 0..area {
            for b in 0..area {
                if orbit_of[a * area + b] != u32::MAX {
                    continue;
                }
                let c = neg_sum2(a, b, side);
                let id = triples.len() as u32;
                let pairs = Self::pair_list(a, b, c, area);
                for &p in &pairs {
                    orbit_of[p] = id;
                }
                triples.push([a as u32, b as u32, c as u32]);
                mult.push(pairs.len() as u8);
            }
        }
        // Number orbits by grid row of k₁ then of k₂, so that consecutive
        // orbits touch a few grid rows of frequencies at a time.
        let mut order: Vec<u32> = (0..triples.len() as u32).collect();
        order.sort_by_key(|&o| {
            let [a, b, _] = triples[o as usize];
            (a as usize / side, b as usize / side, a, b)
        });
        let mut relabel = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            relabel[old as usize] = new as u32;
        }
        orbit_of.iter_mut().for_each(|o| *o = relabel[*o as usize]);
        let triples = order.iter().map(|&o| triples[o as usize]).collect();
        let mult = order.iter().map(|&o| mult[o as usize]).collect();
        Self {
            side,
            orbit_of,
            triples,
            mult,
        }
    }

    fn pair_list(a: usize, b: usize, c: usize, area: usize) -> Vec<usize> {
        let mut pairs = vec![
            a * area + b,
            b * area + a,
            a * area + c,
            c * area + a,
            b * area + c,
            c * area + b,
        ];
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn orbit_of(&self, pair: usize) -> usize {
        self.orbit_of[pair] as usize
    }

    pub fn triple(&self, orbit: usize) -> [usize; 3] {
        let t = self.triples[orbit];
        [t[0] as usize, t[1] as usize, t[2] as usize]
    }

    pub fn multiplicity(&self, orbit: usize) -> usize {
        self.mult[orbit] as usize
    }

    /// Flat pair indices belonging to an orbit.
    pub fn pairs(&self, orbit: usize) -> Vec<usize> {
        let [a, b, c] = self.triple(orbit);
        Self::pair_list(a, b, c, self.side * self.side)
    }

    /// Per-orbit means of a full tensor, and `½ Σ |T − mean|²` (the part of
    /// `½‖T‖²` that no orbit-constant tensor can fit).
    pub fn average(&self, tensor: &[Complex64]) -> (Vec<Complex64>, f64) {
        let mut sums = vec![Complex64::default(); self.len()];
        for (p, z) in tensor.iter().enumerate() {
            sums[self.orbit_of[p] as usize] += z;
        }
        for (s, &m) in sums.iter_mut().zip(&self.mult) {
            *s /= m as f64;
        }
        let spread: f64 = tensor
            .iter()
            .enumerate()
            .map(|(p, z)| (z - sums[self.orbit_of[p] as usize]).norm_sqr())
            .sum();
        (sums, 0.5 * spread)
    }

    /// Full tensor from per-orbit values.
    pub fn expand(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.orbit_of.iter().map(|&o| values[o as usize]).collect()
    }

    pub fn expand_into(&self, values: &[Complex64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(self.orbit_of.iter().map(|&o| values[o as usize]));
    }
}

/// Precomputed forward model `v ↦ Ŝ_{F_v}` with its derivatives.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    basis: DiscBasis,
    design: AngularDesign,
    orbits: OrbitTable,
    /// `e^{iνφ_j}` at `(ν + N)·K + j`.
    phases: Vec<Complex64>,
}

/// Number of independent gradient accumulators; fixed so results do not depend
/// on the thread count.
const GRADIENT_BLOCKS: usize = 16;
const ORBIT_CHUNK: usize = 2048;

impl ForwardModel {
    pub fn new(basis: DiscBasis, design: AngularDesign) -> Self {
        let orbits = OrbitTable::build(basis.side());
        Self::with_orbits(basis, design, orbits)
    }

    pub fn with_orbits(basis: DiscBasis, design: AngularDesign, orbits: OrbitTable) -> Self {
        assert_eq!(orbits.side(), basis.side(), "orbit table does not match the basis grid");
        let top = basis.max_order() as i64;
        let mut phases = Vec::with_capacity((2 * top as usize + 1) * design.len());
        for nu in -top..=top {
            for &phi in design.angles() {
                phases.push(Complex64::from_polar(1.0, nu as f64 * phi));
            }
        }
        Self {
            basis,
            design,
            orbits,
            phases,
        }
    }

    pub fn basis(&self) -> &DiscBasis {
        &self.basis
    }

    pub fn design(&self) -> &AngularDesign {
        &self.design
    }

    pub fn orbits(&self) -> &OrbitTable {
        &self.orbits
    }

    fn check(&self, v: &CoeffVector) -> Result<()> {
        if v.values.len() != self.basis.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", self.basis.dim()),
                actual: format!("{}", v.values.len()),
            });
        }
        if v.values.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(())
    }

    fn phase(&self, order: i32, j: usize) -> Complex64 {
        let top = self.basis.max_order() as i64;
        self.phases[(order as i64 + top) as usize * self.design.len() + j]
    }

    /// `W_j(k) = v·u(φ_j, k)` at `k·K + j`.
    pub fn fields(&self, v: &CoeffVector) -> Vec<Complex64> {
        let area = self.basis.side() * self.basis.side();
        let count = self.design.len();
        let top = self.basis.max_order() as i64;
        let orders = (2 * top + 1) as usize;
        // Radial sums per order, then one phase sum per angle.
        let mut radial = vec![Complex64::default(); orders * area];
        for (i, idx) in self.basis.indices().iter().enumerate() {
            let a = v.values[i];
            if a == Complex64::default() {
                continue;
            }
            let row = &mut radial[(idx.order as i64 + top) as usize * area..][..area];
            for (r, p) in row.iter_mut().zip(self.basis.psi_hat(i)) {
                *r += a * p;
            }
        }
        let mut out = vec![Complex64::default(); area * count];
        out.par_chunks_mut(count).enumerate().for_each(|(k, slot)| {
            for o in 0..orders {
                let p = radial[o * area + k];
                if p == Complex64::default() {
                    continue;
                }
                let ph = &self.phases[o * count..(o + 1) * count];
                for (s, e) in slot.iter_mut().zip(ph) {
                    *s += p * e;
                }
            }
        });
        out
    }

    /// `Ŝ` on each orbit.
    pub fn orbit_values(&self, v: &CoeffVector) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let w = self.fields(v);
        Ok(self.orbit_values_from_fields(&w))
    }

    fn orbit_values_from_fields(&self, w: &[Complex64]) -> Vec<Complex64> {
        let count = self.design.len();
        let weight = self.design.weight();
        let mut out = vec![Complex64::default(); self.orbits.len()];
        out.par_chunks_mut(ORBIT_CHUNK).enumerate().for_each(|(c, chunk)| {
            for (off, slot) in chunk.iter_mut().enumerate() {
                let [a, b, d] = self.orbits.triple(c * ORBIT_CHUNK + off);
                let wa = &w[a * count..(a + 1) * count];
                let wb = &w[b * count..(b + 1) * count];
                let wd = &w[d * count..(d + 1) * count];
                let mut s = Complex64::default();
                for j in 0..count {
                    s += wa[j] * wb[j] * wd[j];
                }
                *slot = s * weight;
            }
        });
        out
    }

    /// Mean `μ = (4n)⁻² Σ_x F(x)` of the image described by `v`.
    pub fn mean(&self, v: &CoeffVector) -> f64 {
        let area = (self.basis.side() * self.basis.side()) as f64;
        let dc: Complex64 = v
            .values
            .iter()
            .enumerate()
            .map(|(i, a)| a * self.basis.psi_hat(i)[0])
            .sum();
        dc.re / area
    }

    /// `Ŝ_{F_v}` over `𝒳 × 𝒳`.
    pub fn forward(&self, v: &CoeffVector) -> Result<InvariantTensor2D> {
        let orbit = self.orbit_values(v)?;
        Ok(InvariantTensor2D {
            n: self.basis.n(),
            values: self.orbits.expand(&orbit),
            mu: self.mean(v),
        })
    }

    /// [`Self::forward`] into an existing tensor, reusing its storage.
    pub fn forward_into(&self, v: &CoeffVector, out: &mut InvariantTensor2D) -> Result<()> {
        let orbit = self.orbit_values(v)?;
        self.orbits.expand_into(&orbit, &mut out.values);
        out.n = self.basis.n();
        out.mu = self.mean(v);
        Ok(())
    }

    /// `∂Ŝ(k₁, k₂)/∂α_i` for every `i` (flat frequency indices).
    pub fn gradient_at(&self, v: &CoeffVector, k1: usize, k2: usize) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let w = self.fields(v);
        Ok(self.gradient_at_fields(&w, k1, k2))
    }

    fn gradient_at_fields(&self, w: &[Complex64], k1: usize, k2: usize) -> Vec<Complex64> {
        let count = self.design.len();
        let k3 = neg_sum2(k1, k2, self.basis.side());
        let weight = self.design.weight();
        self.basis
            .indices()
            .iter()
            .enumerate()
            .map(|(i, idx)| {
                let psi = self.basis.psi_hat(i);
                let mut s = Complex64::default();
                for j in 0..count {
                    let (w1, w2, w3) = (w[k1 * count + j], w[k2 * count + j], w[k3 * count + j]);
                    let term = psi[k1] * w2 * w3 + w1 * psi[k2] * w3 + w1 * w2 * psi[k3];
                    s += term * self.phase(idx.order, j);
                }
                s * weight
            })
            .collect()
    }

    /// The gradient field: entry `pair·d + i` holds `∂Ŝ(pair)/∂α_i`.
    pub fn gradient_field(&self, v: &CoeffVector) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let w = self.fields(v);
        let area = self.basis.side() * self.basis.side();
        Ok((0..area * area)
            .into_par_iter()
            .flat_map_iter(|p| self.gradient_at_fields(&w, p / area, p % area))
            .collect())
    }

    /// `Σ_i w_i ∂Ŝ/∂α_i` per orbit.
    pub fn directional(&self, v: &CoeffVector, dir: &CoeffVector) -> Result<Vec<Complex64>> {
        self.check(v)?;
        self.check(dir)?;
        let w = self.fields(v);
        let dw = self.fields(dir);
        let count = self.design.len();
        let weight = self.design.weight();
        Ok((0..self.orbits.len())
            .into_par_iter()
            .map(|o| {
                let [a, b, c] = self.orbits.triple(o);
                let mut s = Complex64::default();
                for j in 0..count {
                    let (wa, wb, wc) = (w[a * count + j], w[b * count + j], w[c * count + j]);
                    let (da, db, dc) = (dw[a * count + j], dw[b * count + j], dw[c * count + j]);
                    s += da * wb * wc + wa * db * wc + wa * wb * dc;
                }
                s * weight
            })
            .collect())
    }

    /// `h_i = Σ_o c_o ∂Ŝ_o/∂α_i` for per-orbit weights `c`.
    pub fn vjp(&self, v: &CoeffVector, coeff: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let w = self.fields(v);
        Ok(self.vjp_fields(&w, coeff))
    }

    pub(crate) fn vjp_fields(&self, w: &[Complex64], coeff: &[Complex64]) -> Vec<Complex64> {
        let count = self.design.len();
        let area = self.basis.side() * self.basis.side();
        let total = self.orbits.len();
        let per_block = total.div_ceil(GRADIENT_BLOCKS).max(1);
        let partial: Vec<Vec<Complex64>> = (0..GRADIENT_BLOCKS)
            .into_par_iter()
            .map(|block| {
                let mut acc = vec![Complex64::default(); area * count];
                let lo = (block * per_block).min(total);
                let hi = ((block + 1) * per_block).min(total);
                for (o, &c) in (lo..hi).zip(&coeff[lo..hi]) {
                    if c == Complex64::default() {
                        continue;
                    }
                    let [a, b, d] = self.orbits.triple(o);
                    for j in 0..count {
                        let (wa, wb, wd) = (w[a * count + j], w[b * count + j], w[d * count + j]);
                        acc[a * count + j] += c * wb * wd;
                        acc[b * count + j] += c * wa * wd;
                        acc[d * count + j] += c * wa * wb;
                    }
                }
                acc
            })
            .collect();
        let mut acc = vec![Complex64::default(); area * count];
        for part in &partial {
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        // D_ν(k) = Σ_j C_j(k) e^{iνφ_j}, then h_i = Σ_k Ψ̂_i(k) D_{ν_i}(k).
        let top = self.basis.max_order() as i64;
        let orders = (2 * top + 1) as usize;
        let reduced: Vec<Vec<Complex64>> = (0..orders)
            .into_par_iter()
            .map(|o| {
                let ph = &self.phases[o * count..(o + 1) * count];
                (0..area)
                    .map(|k| acc[k * count..(k + 1) * count].iter().zip(ph).map(|(c, e)| c * e).sum())
                    .collect()
            })
            .collect();
        let weight = self.design.weight();
        self.basis
            .indices()
            .iter()
            .enumerate()
            .map(|(i, idx)| {
                let d = &reduced[(idx.order as i64 + top) as usize];
                let s: Complex64 = self.basis.psi_hat(i).iter().zip(d).map(|(p, x)| p * x).sum();
                s * weight
            })
            .collect()
    }

    /// Orbit values and the fields they were built from, for cost evaluation.
    pub(crate) fn evaluate(&self, v: &CoeffVector) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        self.check(v)?;
        let w = self.fields(v);
        let values = self.orbit_values_from_fields(&w);
        Ok((values, w))
    }
}

/// Signed frequency of a flat index, for diagnostics and binning.
pub(crate) fn frequency(k: usize, side: usize) -> (i64, i64) {
    (signed(k / side, side), signed(k % side, side))
}
