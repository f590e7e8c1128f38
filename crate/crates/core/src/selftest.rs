//! A fast suite of invariant checks run by `mtdrot selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{BasisSize, CoeffVector, DiscBasis};
use crate::error::Result;
use crate::estimate::MomentAccumulator;
use crate::invariants::{auto3_v, autocorr3_2d, bin_map, AngularDesign, ForwardModel};
use crate::lattice::wrap2;
use crate::model::{micrograph_rng, rotate1d, synthesize_1d, MeasurementConfig, Micrograph, TargetSignal1D};
use crate::recover::{
    align_error_1d, bispectrum_direct, cost_binned, grad_binned, invert_bispectrum, BinnedTarget, PhaseMethod,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn shift_invariance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let f = TargetSignal1D::random(5, rng);
    let v = auto3_v(&f);
    let mut worst: f64 = 0.0;
    for tau in -5..5 {
        worst = worst.max(max_gap(&auto3_v(&rotate1d(&f, tau)?), &v));
    }
    Ok(worst)
}

fn bispectrum_round_trip(rng: &mut ChaCha8Rng) -> Result<f64> {
    let f = TargetSignal1D::random(6, rng);
    let g = invert_bispectrum(&bispectrum_direct(&f), PhaseMethod::Recursive)?;
    align_error_1d(&g, &f)
}

fn autocorr_2d_brute(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n) = (16usize, 2usize);
    let pixels: Vec<f64> = (0..m * m).map(|_| rng.sample(StandardNormal)).collect();
    let mic = Micrograph { dim: 2, m, pixels };
    let fast = autocorr3_2d(&mic, n)?;
    let len = 4 * n;
    let at = |r: i64, c: i64| -> f64 {
        if (0..m as i64).contains(&r) && (0..m as i64).contains(&c) {
            mic.pixels[r as usize * m + c as usize]
        } else {
            0.0
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..64 {
        let x1 = (rng.random_range(-4..4), rng.random_range(-4..4));
        let x2 = (rng.random_range(-4..4), rng.random_range(-4..4));
        let mut sum = 0.0;
        for r in 0..m as i64 {
            for c in 0..m as i64 {
                sum += at(r, c) * at(r + x1.0, c + x1.1) * at(r + x2.0, c + x2.1);
            }
        }
        let i = wrap2(x1.0, x1.1, len) * len * len + wrap2(x2.0, x2.1, len);
        worst = worst.max((fast[i] - sum / (m * m) as f64).abs());
    }
    Ok(worst)
}

fn nyquist_quadrature(basis: &DiscBasis, v: &CoeffVector) -> Result<f64> {
    let k = AngularDesign::nyquist_count(basis);
    let a = ForwardModel::new(basis.clone(), AngularDesign::nyquist(basis)).forward(v)?;
    // The finer design carries the same total weight.
    let b = ForwardModel::new(basis.clone(), AngularDesign::with_count(basis, 2 * k)?).forward(v)?;
    Ok(a.relative_distance(&b))
}

fn binned_gradient(basis: &DiscBasis, v: &CoeffVector, rng: &mut ChaCha8Rng) -> Result<f64> {
    let model = ForwardModel::new(basis.clone(), AngularDesign::nyquist(basis));
    let map = bin_map(basis.n(), 1.0, 2.0)?;
    let truth = basis.random_coeffs(rng);
    let values = map.reduce(&model.forward(&truth)?.values)?;
    let target = BinnedTarget::new(&model, map.clone(), values)?;
    let (_, g) = grad_binned(&model, v, &target, &map)?;
    let x = v.to_real_params(basis);
    let dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let eps = 1e-5;
    let shifted = |t: f64| {
        let p: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
        CoeffVector::from_real_params(basis, &p)
    };
    let numeric = (cost_binned(&model, &shifted(eps), &target, &map)?
        - cost_binned(&model, &shifted(-eps), &target, &map)?)
        / (2.0 * eps);
    let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
    Ok((numeric - analytic).abs() / analytic.abs().max(1e-300))
}

fn merge_law() -> Result<f64> {
    let cfg = MeasurementConfig {
        dim: 1,
        m: 256,
        n: 2,
        p: 8,
        sigma: 0.5,
        seed: 9,
    };
    let f = TargetSignal1D::random(2, &mut ChaCha8Rng::seed_from_u64(1));
    let mics: Vec<Micrograph> = (0..4)
        .map(|i| synthesize_1d(&cfg, &f, &mut micrograph_rng(cfg.seed, i)).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut whole = MomentAccumulator::empty(1, cfg.m, cfg.n)?;
    whole.absorb_all(&mics)?;
    let mut a = MomentAccumulator::empty(1, cfg.m, cfg.n)?;
    let mut b = a.clone();
    a.absorb_all(&mics[..1])?;
    b.absorb_all(&mics[1..])?;
    let merged = b.merge(&a)?;
    Ok(max_gap(&merged.sum_a, &whole.sum_a))
}

/// Runs every check; failures to evaluate count as failed checks.
pub fn run() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut out = Vec::new();
    let mut record = |name: &'static str, tolerance: f64, value: Result<f64>| {
        out.push(Check {
            name,
            value: value.unwrap_or(f64::INFINITY),
            tolerance,
        });
    };
    record(
        "triple correlation is shift invariant",
        1e-12,
        shift_invariance(&mut rng),
    );
    record("bispectrum inversion round trip", 1e-8, bispectrum_round_trip(&mut rng));
    record(
        "2D autocorrelation matches direct sums",
        1e-10,
        autocorr_2d_brute(&mut rng),
    );
    let basis = DiscBasis::build(3, BasisSize::Count(10));
    match basis {
        Ok(basis) => {
            let v = basis.random_coeffs(&mut rng);
            record("Nyquist angular design is exact", 1e-10, nyquist_quadrature(&basis, &v));
            record(
                "binned cost gradient matches finite differences",
                1e-6,
                binned_gradient(&basis, &v, &mut rng),
            );
        }
        Err(e) => {
            record("Nyquist angular design is exact", 1e-10, Err(e));
        }
    }
    record("accumulator merge equals a single pass", 1e-10, merge_law());
    out
}
