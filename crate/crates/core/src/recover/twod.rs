use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::basis::CoeffVector;
use crate::error::{Error, Result};
use crate::invariants::ForwardModel;

use super::bfgs::{minimize, MinimizeReport, Objective, OptimizerOptions};
use super::cost::{grad_binned, grad_unbinned, BinnedTarget, UnbinnedTarget};
use super::oned::align_error_2d;

/// What the 2D fit is matched against.
#[derive(Debug, Clone)]
pub enum Target2D {
    Unbinned(UnbinnedTarget),
    Binned(BinnedTarget),
}

impl Target2D {
    fn norm2(&self) -> f64 {
        match self {
            Target2D::Unbinned(t) => t.norm2(),
            Target2D::Binned(t) => t.norm2(),
        }
    }

    fn cost_grad(&self, model: &ForwardModel, v: &CoeffVector) -> Result<(f64, Vec<f64>)> {
        match self {
            Target2D::Unbinned(t) => grad_unbinned(model, v, t),
            Target2D::Binned(t) => grad_binned(model, v, t, t.map()),
        }
    }

    /// `‖Ŝ_{F_v}‖` measured the way the target is compared.
    fn model_norm(&self, model: &ForwardModel, v: &CoeffVector) -> Result<f64> {
        let values = model.orbit_values(v)?;
        Ok(match self {
            Target2D::Unbinned(_) => values
                .iter()
                .enumerate()
                .map(|(o, z)| model.orbits().multiplicity(o) as f64 * z.norm_sqr())
                .sum::<f64>()
                .sqrt(),
            Target2D::Binned(t) => t
                .reduce_orbits(&values)
                .iter()
                .map(Complex64::norm_sqr)
                .sum::<f64>()
                .sqrt(),
        })
    }
}

/// Cost divided by `‖target‖²` as a function of `x = params / scale`.
struct Scaled<'a> {
    model: &'a ForwardModel,
    target: &'a Target2D,
    scale: f64,
    norm2: f64,
}

impl Scaled<'_> {
    fn coeffs(&self, x: &[f64]) -> CoeffVector {
        let params: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        CoeffVector::from_real_params(self.model.basis(), &params)
    }
}

impl Objective for Scaled<'_> {
    fn dim(&self) -> usize {
        self.model.basis().dim()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (c, g) = self.target.cost_grad(self.model, &self.coeffs(x))?;
        let k = self.scale / self.norm2;
        Ok((c / self.norm2, g.iter().map(|v| v * k).collect()))
    }
}

/// Central-difference check of the gradient along one random direction.
fn probe_gradient<O: Objective>(obj: &O, x: &[f64], rng: &mut ChaCha8Rng) -> Result<()> {
    let dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let dir: Vec<f64> = dir.iter().map(|d| d / len).collect();
    let (_, g) = obj.value_grad(x)?;
    let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let eps = 1e-5 * x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let at = |t: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, b)| a + t * b).collect() };
    let numeric = (obj.value(&at(eps))? - obj.value(&at(-eps))?) / (2.0 * eps);
    let gap = (numeric - analytic).abs();
    if gap > 1e-4 * numeric.abs().max(analytic.abs()).max(1e-8) {
        return Err(Error::Optimizer(format!(
            "gradient probe failed: analytic {analytic:e}, finite difference {numeric:e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub start: usize,
    pub scale: f64,
    pub report: MinimizeReport,
    pub aligned_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    /// Best cost divided by `‖target‖²`.
    pub final_cost: f64,
    pub iterations: usize,
    pub starts: usize,
    pub runs: Vec<RunSummary>,
    pub aligned_error: Option<f64>,
    pub aligned_angle: Option<f64>,
    pub wall_seconds: f64,
}

/// Fits steerable coefficients to a target by BFGS from random starts.
pub fn recover_2d(
    model: &ForwardModel,
    target: &Target2D,
    opts: &OptimizerOptions,
    truth: Option<&CoeffVector>,
) -> Result<(CoeffVector, RecoveryReport)> {
    opts.validate()?;
    let clock = Instant::now();
    let basis = model.basis();
    let norm2 = target.norm2();
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Err(Error::invalid("target has zero or non-finite norm"));
    }
    let mut runs = Vec::new();
    let mut best: Option<(f64, CoeffVector)> = None;
    for start in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(start as u64);
        let x0: Vec<f64> = (0..basis.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let unit = CoeffVector::from_real_params(basis, &x0);
        let produced = target.model_norm(model, &unit)?;
        if produced == 0.0 {
            return Err(Error::Optimizer("random start produced a zero invariant".into()));
        }
        let scale = opts.initial_scale * (norm2.sqrt() / produced).cbrt();
        let obj = Scaled {
            model,
            target,
            scale,
            norm2,
        };
        probe_gradient(&obj, &x0, &mut rng)?;
        let (x, report) = minimize(&obj, &x0, opts)?;
        let v = obj.coeffs(&x);
        let aligned_error = truth
            .map(|t| align_error_2d(&v, t, basis).map(|a| a.error))
            .transpose()?;
        let cost = report.final_cost;
        runs.push(RunSummary {
            start,
            scale,
            report,
            aligned_error,
        });
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, v));
        }
        if cost <= opts.success_cost {
            break;
        }
    }
    let (final_cost, v) = best.expect("at least one start");
    let alignment = truth.map(|t| align_error_2d(&v, t, basis)).transpose()?;
    let report = RecoveryReport {
        final_cost,
        iterations: runs.iter().map(|r| r.report.iterations).sum(),
        starts: runs.len(),
        runs,
        aligned_error: alignment.map(|a| a.error),
        aligned_angle: alignment.map(|a| a.angle),
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    Ok((v, report))
}
