use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth function of real parameters.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Stop once `‖∇g‖₂` of the normalized cost falls below this.
    pub gradient_tolerance: f64,
    /// Multiplies the cube-root scale of the random starting point.
    pub initial_scale: f64,
    /// Number of starts, including the first.
    pub restarts: usize,
    pub seed: u64,
    /// A start whose normalized cost ends below this is accepted without
    /// trying the remaining ones.
    pub success_cost: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_tolerance: 1e-9,
            initial_scale: 1.0,
            restarts: 5,
            seed: 0,
            success_cost: 1e-20,
        }
    }
}

impl OptimizerOptions {
    /// Defaults for noisy targets.
    pub fn noisy() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            success_cost: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.gradient_tolerance) || !positive(self.initial_scale) {
            return Err(Error::Config(
                "optimizer tolerance and initial scale must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::Config(
                "optimizer needs at least one iteration and one start".into(),
            ));
        }
        if self.success_cost.is_nan() || self.success_cost < 0.0 {
            return Err(Error::Config("success cost must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Gradient,
    Stalled,
    IterationCap,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub gradient_norm: f64,
    pub termination: Termination,
    /// Whether every accepted step lowered the cost.
    pub monotone: bool,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const STALL_WINDOW: usize = 25;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Counter<'a, O: Objective> {
    obj: &'a O,
    evaluations: usize,
}

impl<O: Objective> Counter<'_, O> {
    fn eval(&mut self, x: Vec<f64>) -> Result<Point> {
        self.evaluations += 1;
        let (f, g) = self.obj.value_grad(&x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer("objective returned a non-finite value".into()));
        }
        Ok(Point { x, f, g })
    }
}

fn step_to(x: &[f64], p: &[f64], a: f64) -> Vec<f64> {
    x.iter().zip(p).map(|(xi, pi)| xi + a * pi).collect()
}

/// Cubic interpolation of the minimizer between two points with known values
/// and slopes, kept inside the central 80% of the bracket.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let guard = 0.1 * (hi - lo);
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mut t = f64::NAN;
    if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    }
    if !t.is_finite() || t < lo + guard || t > hi - guard {
        t = 0.5 * (lo + hi);
    }
    t
}

/// Strong-Wolfe line search along `p` from `start`.
fn line_search<O: Objective>(
    counter: &mut Counter<'_, O>,
    start: &Point,
    p: &[f64],
    initial: f64,
) -> Result<Option<Point>> {
    let f0 = start.f;
    let d0 = dot(&start.g, p);
    let armijo = |a: f64, f: f64| f <= f0 + C1 * a * d0;
    let curvature = |d: f64| d.abs() <= -C2 * d0;

    let mut prev_a = 0.0;
    let mut prev_f = f0;
    let mut prev_d = d0;
    let mut a = initial;
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;
    for i in 0..40 {
        let pt = counter.eval(step_to(&start.x, p, a))?;
        let d = dot(&pt.g, p);
        if !armijo(a, pt.f) || (i > 0 && pt.f >= prev_f) {
            bracket = Some((prev_a, prev_f, prev_d, a, pt.f, d));
            break;
        }
        if curvature(d) {
            return Ok(Some(pt));
        }
        if d >= 0.0 {
            bracket = Some((a, pt.f, d, prev_a, prev_f, prev_d));
            break;
        }
        prev_a = a;
        prev_f = pt.f;
        prev_d = d;
        a *= 2.0;
    }
    let Some((mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi, mut d_hi)) = bracket else {
        return Ok(None);
    };
    let mut best: Option<Point> = None;
    for _ in 0..60 {
        if (hi - lo).abs() <= 1e-16 * lo.abs().max(hi.abs()).max(1e-300) {
            break;
        }
        let a = interpolate(lo, f_lo, d_lo, hi, f_hi, d_hi);
        let pt = counter.eval(step_to(&start.x, p, a))?;
        let d = dot(&pt.g, p);
        if !armijo(a, pt.f) || pt.f >= f_lo {
            hi = a;
            f_hi = pt.f;
            d_hi = d;
        } else {
            if curvature(d) {
                return Ok(Some(pt));
            }
            if d * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = a;
            f_lo = pt.f;
            d_lo = d;
            best = Some(pt);
        }
    }
    // A sufficient-decrease point is still progress even if the curvature
    // condition could not be met to rounding precision.
    Ok(best.filter(|b| b.f < f0))
}

/// BFGS with a strong-Wolfe line search, starting at `x0`.
pub fn minimize<O: Objective>(obj: &O, x0: &[f64], opts: &OptimizerOptions) -> Result<(Vec<f64>, MinimizeReport)> {
    opts.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", obj.dim()),
            actual: format!("{}", x0.len()),
        });
    }
    let dim = x0.len();
    let mut counter = Counter { obj, evaluations: 0 };
    let mut cur = counter.eval(x0.to_vec())?;
    let initial_cost = cur.f;
    let identity = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..dim {
            h[i * dim + i] = scale;
        }
    };
    let mut h = vec![0.0; dim * dim];
    identity(&mut h, 1.0);
    let mut fresh = true;
    let mut monotone = true;
    let mut stall = 0;
    let mut iterations = 0;
    let mut termination = Termination::IterationCap;
    while iterations < opts.max_iterations {
        if norm(&cur.g) <= opts.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        let mut p: Vec<f64> = (0..dim).map(|i| -dot(&h[i * dim..(i + 1) * dim], &cur.g)).collect();
        if dot(&p, &cur.g) >= 0.0 {
            identity(&mut h, 1.0);
            fresh = true;
            p = cur.g.iter().map(|v| -v).collect();
        }
        let initial = if fresh { (1.0 / norm(&p)).min(1.0) } else { 1.0 };
        let next = match line_search(&mut counter, &cur, &p, initial)? {
            Some(pt) => pt,
            None if !fresh => {
                identity(&mut h, 1.0);
                fresh = true;
                continue;
            }
            None => {
                termination = Termination::LineSearchFailed;
                break;
            }
        };
        iterations += 1;
        if next.f > cur.f {
            monotone = false;
        }
        if cur.f - next.f <= 1e-14 * cur.f.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                identity(&mut h, sy / dot(&y, &y));
                fresh = false;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..dim).map(|i| dot(&h[i * dim..(i + 1) * dim], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..dim {
                for j in 0..dim {
                    h[i * dim + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        cur = next;
        if stall >= STALL_WINDOW {
            termination = Termination::Stalled;
            break;
        }
    }
    if termination == Termination::IterationCap && norm(&cur.g) <= opts.gradient_tolerance {
        termination = Termination::Gradient;
    }
    let report = MinimizeReport {
        iterations,
        evaluations: counter.evaluations,
        initial_cost,
        final_cost: cur.f,
        gradient_norm: norm(&cur.g),
        termination,
        monotone,
    };
    Ok((cur.x, report))
}
