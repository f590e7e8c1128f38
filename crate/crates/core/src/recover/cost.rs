use num_complex::Complex64;

use crate::basis::{real_param_gradient, CoeffVector};
use crate::error::{Error, Result};
use crate::invariants::{BinMap, ForwardModel, InvariantTensor2D};

/// A full `Ŝ` target reduced to orbit means. The least-squares cost against the
/// full tensor equals the orbit-weighted cost plus the constant `offset`.
#[derive(Debug, Clone)]
pub struct UnbinnedTarget {
    values: Vec<Complex64>,
    offset: f64,
    norm2: f64,
}

impl UnbinnedTarget {
    pub fn new(model: &ForwardModel, tensor: &InvariantTensor2D) -> Result<Self> {
        if tensor.n != model.basis().n() {
            return Err(Error::ShapeMismatch {
                expected: format!("tensor with n = {}", model.basis().n()),
                actual: format!("n = {}", tensor.n),
            });
        }
        let (values, offset) = model.orbits().average(&tensor.values);
        let norm2 = tensor.values.iter().map(|z| z.norm_sqr()).sum();
        Ok(Self { values, offset, norm2 })
    }

    /// `‖target‖²` over all pairs.
    pub fn norm2(&self) -> f64 {
        self.norm2
    }
}

/// Bin sums of a target together with the orbit/bin incidence counts.
#[derive(Debug, Clone)]
pub struct BinnedTarget {
    map: BinMap,
    /// Per orbit, `(bin, number of the orbit's pairs in that bin)`.
    offsets: Vec<usize>,
    entries: Vec<(u32, u32)>,
    values: Vec<Complex64>,
}

impl BinnedTarget {
    pub fn new(model: &ForwardModel, map: BinMap, values: Vec<Complex64>) -> Result<Self> {
        if map.n() != model.basis().n() {
            return Err(Error::ShapeMismatch {
                expected: format!("bin map with n = {}", model.basis().n()),
                actual: format!("n = {}", map.n()),
            });
        }
        if values.len() != map.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bins", map.len()),
                actual: format!("{}", values.len()),
            });
        }
        let orbits = model.orbits();
        let mut offsets = Vec::with_capacity(orbits.len() + 1);
        let mut entries = Vec::with_capacity(orbits.len() * 2);
        offsets.push(0);
        let mut bins: Vec<u32> = Vec::with_capacity(6);
        for o in 0..orbits.len() {
            bins.clear();
            bins.extend(orbits.pairs(o).into_iter().map(|p| map.bin_of(p) as u32));
            bins.sort_unstable();
            let mut i = 0;
            while i < bins.len() {
                let mut j = i;
                while j < bins.len() && bins[j] == bins[i] {
                    j += 1;
                }
                entries.push((bins[i], (j - i) as u32));
                i = j;
            }
            offsets.push(entries.len());
        }
        Ok(Self {
            map,
            offsets,
            entries,
            values,
        })
    }

    pub fn map(&self) -> &BinMap {
        &self.map
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Bin sums of an orbit-valued tensor.
    pub fn reduce_orbits(&self, orbit_values: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.map.len()];
        for (o, z) in orbit_values.iter().enumerate() {
            for &(t, c) in &self.entries[self.offsets[o]..self.offsets[o + 1]] {
                out[t as usize] += z * c as f64;
            }
        }
        out
    }

    fn check(&self, map: &BinMap) -> Result<()> {
        if !self.map.same_layout(map) {
            return Err(Error::invalid("bin map differs from the one used for the target"));
        }
        Ok(())
    }
}

fn unbinned_parts(
    model: &ForwardModel,
    v: &CoeffVector,
    target: &UnbinnedTarget,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if target.values.len() != model.orbits().len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} orbits", model.orbits().len()),
            actual: format!("{}", target.values.len()),
        });
    }
    let (values, fields) = model.evaluate(v)?;
    let orbits = model.orbits();
    let mut cost = target.offset;
    let mut coeff = Vec::with_capacity(if want_grad { values.len() } else { 0 });
    for (o, (s, t)) in values.iter().zip(&target.values).enumerate() {
        let r = s - t;
        let m = orbits.multiplicity(o) as f64;
        cost += 0.5 * m * r.norm_sqr();
        if want_grad {
            coeff.push(r.conj() * m);
        }
    }
    let grad = want_grad.then(|| {
        let h = model.vjp_fields(&fields, &coeff);
        real_param_gradient(model.basis(), &h)
    });
    Ok((cost, grad))
}

fn binned_parts(
    model: &ForwardModel,
    v: &CoeffVector,
    target: &BinnedTarget,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if target.offsets.len() != model.orbits().len() + 1 {
        return Err(Error::invalid("binned target was built for a different model"));
    }
    let (values, fields) = model.evaluate(v)?;
    let sums = target.reduce_orbits(&values);
    let residual: Vec<Complex64> = sums.iter().zip(&target.values).map(|(s, t)| s - t).collect();
    let cost = 0.5 * residual.iter().map(|r| r.norm_sqr()).sum::<f64>();
    let grad = want_grad.then(|| {
        let coeff: Vec<Complex64> = (0..values.len())
            .map(|o| {
                target.entries[target.offsets[o]..target.offsets[o + 1]]
                    .iter()
                    .map(|&(t, c)| residual[t as usize].conj() * c as f64)
                    .sum()
            })
            .collect();
        let h = model.vjp_fields(&fields, &coeff);
        real_param_gradient(model.basis(), &h)
    });
    Ok((cost, grad))
}

/// `g(v) = ½ Σ_{k₁,k₂} |Ŝ_{F_v}(k₁,k₂) − Ŝ(k₁,k₂)|²`.
pub fn cost_unbinned(model: &ForwardModel, v: &CoeffVector, target: &UnbinnedTarget) -> Result<f64> {
    Ok(unbinned_parts(model, v, target, false)?.0)
}

/// Cost and its gradient with respect to the real parameters of `v`
/// (see [`CoeffVector::to_real_params`]).
pub fn grad_unbinned(model: &ForwardModel, v: &CoeffVector, target: &UnbinnedTarget) -> Result<(f64, Vec<f64>)> {
    let (c, g) = unbinned_parts(model, v, target, true)?;
    Ok((c, g.unwrap_or_default()))
}

/// `g_b(v) = ½ Σ_T |Σ_{(k₁,k₂) ∈ I_T} (Ŝ_{F_v} − Ŝ)(k₁,k₂)|²`.
pub fn cost_binned(model: &ForwardModel, v: &CoeffVector, target: &BinnedTarget, map: &BinMap) -> Result<f64> {
    target.check(map)?;
    Ok(binned_parts(model, v, target, false)?.0)
}

/// Binned cost and its real-parameter gradient.
pub fn grad_binned(
    model: &ForwardModel,
    v: &CoeffVector,
    target: &BinnedTarget,
    map: &BinMap,
) -> Result<(f64, Vec<f64>)> {
    target.check(map)?;
    let (c, g) = binned_parts(model, v, target, true)?;
    Ok((c, g.unwrap_or_default()))
}
