//! Integer-order Bessel functions of the first kind and their positive roots.
//!
//! `J_ν(x)` is evaluated by its power series for small arguments and by
//! Miller's backward recurrence (normalized with `J_0 + 2 Σ J_{2k} = 1`)
//! otherwise. Roots of order `ν` are bracketed by consecutive roots of order
//! `ν − 1` (interlacing) and polished with safeguarded Newton steps.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest argument accepted by [`bessel_j`].
pub const MAX_ARG: f64 = 2.0e3;
/// Largest order accepted by [`bessel_j`].
pub const MAX_ORDER: u32 = 1000;

const SERIES_LIMIT: f64 = 8.0;

/// Bessel function of the first kind `J_ν(x)` for integer `ν ≥ 0` and `x ≥ 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if !(0.0..=MAX_ARG).contains(&x) || order > MAX_ORDER {
        return Err(Error::invalid(format!(
            "bessel_j({order}, {x}) outside supported range 0 <= x <= {MAX_ARG}, order <= {MAX_ORDER}"
        )));
    }
    Ok(j_unchecked(order, x))
}

pub(crate) fn j_unchecked(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    // The series loses digits to cancellation once x/2 grows, whatever the
    // order, so the recurrence takes over at a fixed argument.
    if x < SERIES_LIMIT {
        series(order, x)
    } else {
        miller(order, x)
    }
}

/// Signed-order variant: `J_{-ν} = (-1)^ν J_ν`.
pub(crate) fn j_signed(order: i32, x: f64) -> f64 {
    let v = j_unchecked(order.unsigned_abs(), x);
    if order < 0 && order % 2 != 0 {
        -v
    } else {
        v
    }
}

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^ν / ν!, built incrementally to avoid overflow for large ν.
    let mut lead = 1.0;
    for k in 1..=order {
        lead *= half / k as f64;
    }
    if lead == 0.0 {
        return 0.0;
    }
    let q = -half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= q / (m as f64 * (m + order) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && m as f64 > half {
            break;
        }
        if m > 500 {
            break;
        }
    }
    lead * sum
}

fn miller(order: u32, x: f64) -> f64 {
    let big = f64::max(order as f64, x);
    let mut start = (big + 30.0 + (60.0 * big).sqrt()) as u32;
    start += start % 2;
    let inv = 2.0 / x;
    let mut j_next = 0.0_f64;
    let mut j_cur = 1e-300_f64;
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let j_prev = k as f64 * inv * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds the unnormalized J_{k-1}.
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
        let idx = k - 1;
        if idx == order {
            wanted = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j_cur;
        }
    }
    norm += j_cur;
    wanted / norm
}

/// Derivative `J_ν'(x) = J_{ν-1}(x) − (ν/x) J_ν(x)` (with `J_0' = −J_1`).
pub(crate) fn j_prime(order: u32, x: f64) -> f64 {
    if order == 0 {
        -j_unchecked(1, x)
    } else {
        0.5 * (j_unchecked(order - 1, x) - j_unchecked(order + 1, x))
    }
}

/// The first `count` positive roots of `J_ν`, strictly increasing.
pub fn bessel_roots(order: u32, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("bessel_roots: count must be at least 1"));
    }
    if order > MAX_ORDER {
        return Err(Error::invalid(format!("bessel_roots: order {order} too large")));
    }
    Ok(roots_up_to_order(order, count))
}

/// Roots of `J_ν` for ν = 0..=order; each order gets enough roots to bracket
/// the next one.
fn roots_up_to_order(order: u32, count: usize) -> Vec<f64> {
    let needed = count + order as usize;
    let mut prev: Vec<f64> = (1..=needed)
        .map(|q| {
            let lo = (q as f64 - 0.5) * PI;
            let hi = q as f64 * PI;
            refine_root(0, lo, hi)
        })
        .collect();
    for nu in 1..=order {
        let keep = needed - nu as usize;
        let cur: Vec<f64> = (0..keep).map(|q| refine_root(nu, prev[q], prev[q + 1])).collect();
        prev = cur;
    }
    prev.truncate(count);
    prev
}

/// All roots `j_{ν,q} ≤ limit` for every order with `j_{ν,1} ≤ limit`, as
/// `(ν, q, root)` triples.
pub(crate) fn roots_below(limit: f64) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::new();
    // Roots of order 0 lie in ((q - 1/2)π, qπ). Each order consumes one
    // bracket and j_{ν,1} > ν, so about `limit` extra brackets are needed.
    let zero_count = (limit / PI + limit + 3.0) as usize;
    let mut prev: Vec<f64> = (1..=zero_count)
        .map(|q| refine_root(0, (q as f64 - 0.5) * PI, q as f64 * PI))
        .collect();
    let mut nu = 0u32;
    loop {
        let mut any = false;
        for (q, &r) in prev.iter().enumerate() {
            if r <= limit {
                out.push((nu, q as u32 + 1, r));
                any = true;
            }
        }
        if !any || prev.len() < 2 {
            break;
        }
        nu += 1;
        prev = prev.windows(2).map(|w| refine_root(nu, w[0], w[1])).collect();
    }
    out
}

/// Root of `J_ν` inside `(lo, hi)` where the function changes sign.
fn refine_root(order: u32, lo: f64, hi: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let mut fa = j_unchecked(order, a);
    let fb = j_unchecked(order, b);
    debug_assert!(fa * fb <= 0.0, "no sign change for J_{order} on [{lo}, {hi}]");
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = j_unchecked(order, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = j_prime(order, x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() < 1e-15 * x.max(1.0) || (b - a) < 1e-14 {
            x = next;
            break;
        }
        x = next;
    }
    x
}
