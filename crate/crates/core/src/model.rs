//! Targets, measurement configuration and synthesis of 1D measurements and 2D
//! micrographs containing separated, randomly rotated copies plus noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{CoeffVector, DiscBasis};
use crate::error::{Error, Result};
use crate::invariants::AngularDesign;
use crate::lattice::wrap2;

/// Real signal supported on `{−n, …, n − 1}`; `values[x + n] = F(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSignal1D {
    n: usize,
    values: Vec<f64>,
}

impl TargetSignal1D {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != 2 * n {
            return Err(Error::invalid(format!(
                "signal with half-support {n} needs {} samples, got {}",
                2 * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal samples must be finite"));
        }
        Ok(Self { n, values })
    }

    /// Spike of height `amplitude` at `x`.
    pub fn delta(n: usize, x: i64, amplitude: f64) -> Result<Self> {
        let mut values = vec![0.0; 2 * n];
        let pos = x + n as i64;
        if pos < 0 || pos >= 2 * n as i64 {
            return Err(Error::invalid(format!("spike position {x} outside support")));
        }
        values[pos as usize] = amplitude;
        Self::new(n, values)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let values = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `F(x)`, zero off the support.
    pub fn at(&self, x: i64) -> f64 {
        let pos = x + self.n as i64;
        if pos < 0 || pos >= 2 * self.n as i64 {
            0.0
        } else {
            self.values[pos as usize]
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Reduces `x` modulo `2n` into `{−n, …, n − 1}`.
#[inline]
pub(crate) fn centered_mod(x: i64, n: usize) -> i64 {
    let period = 2 * n as i64;
    (x + n as i64).rem_euclid(period) - n as i64
}

/// Cyclic rotation of the support: `F_τ(x) = F((x + τ) mod 2n)`.
pub fn rotate1d(f: &TargetSignal1D, tau: i64) -> Result<TargetSignal1D> {
    let n = f.n as i64;
    if tau < -n || tau >= n {
        return Err(Error::invalid(format!("shift {tau} outside {{-{n}, ..., {}}}", n - 1)));
    }
    Ok(rotate_unchecked(f, tau))
}

fn rotate_unchecked(f: &TargetSignal1D, tau: i64) -> TargetSignal1D {
    let n = f.n as i64;
    let values = (-n..n).map(|x| f.at(centered_mod(x + tau, f.n))).collect();
    TargetSignal1D { n: f.n, values }
}

/// Parameters of one synthetic measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    /// 1 for signals, 2 for micrographs.
    pub dim: u8,
    /// Side length in pixels.
    pub m: usize,
    /// Target radius in pixels.
    pub n: usize,
    /// Number of planted copies.
    pub p: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl MeasurementConfig {
    /// Copy count from a density: `p = round(γm/n)` in 1D, `round(γm²/n²)` in 2D.
    pub fn from_density(dim: u8, m: usize, n: usize, gamma: f64, sigma: f64, seed: u64) -> Self {
        let ratio = m as f64 / n as f64;
        let p = (gamma * ratio.powi(dim as i32)).round().max(0.0) as usize;
        Self {
            dim,
            m,
            n,
            p,
            sigma,
            seed,
        }
    }

    /// `γ = np/m` in 1D, `pn²/m²` in 2D.
    pub fn gamma(&self) -> f64 {
        let ratio = self.n as f64 / self.m as f64;
        self.p as f64 * ratio.powi(self.dim as i32)
    }

    pub fn pixel_count(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.m < 8 * self.n {
            return Err(Error::Config(format!(
                "m = {} must be at least 8n = {}",
                self.m,
                8 * self.n
            )));
        }
        let d = self.dim as u32;
        if (self.p as f64) * ((4 * self.n) as f64).powi(d as i32) > (self.m as f64).powi(d as i32) {
            return Err(Error::Config(format!(
                "p = {} copies cannot be separated by 4n = {} in a measurement of side {}",
                self.p,
                4 * self.n,
                self.m
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// A measurement: length `m` in 1D or `m × m` (row-major) in 2D. Pixel `x`
/// (1-based, as in the model) is stored at `x − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Micrograph {
    pub dim: u8,
    pub m: usize,
    pub pixels: Vec<f64>,
}

impl Micrograph {
    pub fn zeros(dim: u8, m: usize) -> Self {
        Self {
            dim,
            m,
            pixels: vec![0.0; m.pow(dim as u32)],
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.pixels.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / self.pixels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement1D {
    pub shifts: Vec<i64>,
    pub positions: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement2D {
    pub positions: Vec<(i64, i64)>,
    pub angles: Vec<f64>,
}

/// Deterministic RNG for micrograph `index` of a run seeded with `seed`.
pub fn micrograph_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Rejection-samples `p` separated positions (1-based coordinates).
///
/// 1D positions come from `{n+1, …, m−n+1}` with `|x_i − x_j| ≥ 4n` and the
/// periodic condition `m − |x_i − x_j| > 4n`; 2D positions come from
/// `{n+1, …, m−n}²` with Euclidean separation `≥ 4n`.
pub fn place_targets<R: Rng + ?Sized>(cfg: &MeasurementConfig, rng: &mut R) -> Result<Vec<Vec<i64>>> {
    let budget = 1000 * cfg.p.max(1);
    let sep = 4 * cfg.n as i64;
    let m = cfg.m as i64;
    let n = cfg.n as i64;
    let cells = (cfg.m as i64 + sep - 1) / sep;
    let dim = cfg.dim as usize;
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); (cells as usize).pow(dim as u32)];
    let mut placed: Vec<Vec<i64>> = Vec::with_capacity(cfg.p);
    let mut attempts = 0;
    while placed.len() < cfg.p {
        if attempts >= budget {
            return Err(Error::Placement {
                placed: placed.len(),
                requested: cfg.p,
                attempts,
            });
        }
        attempts += 1;
        let cand: Vec<i64> = if dim == 1 {
            vec![rng.random_range(n + 1..=m - n + 1)]
        } else {
            vec![rng.random_range(n + 1..=m - n), rng.random_range(n + 1..=m - n)]
        };
        let cell: Vec<i64> = cand.iter().map(|c| (c - 1) / sep).collect();
        let mut ok = true;
        'scan: for off in neighbor_offsets(dim) {
            let mut flat = 0usize;
            for (axis, c) in cell.iter().enumerate() {
                let mut t = c + off[axis];
                if dim == 1 {
                    t = t.rem_euclid(cells);
                } else if t < 0 || t >= cells {
                    continue 'scan;
                }
                flat = flat * cells as usize + t as usize;
            }
            for &j in &grid[flat] {
                let other = &placed[j];
                let clash = if dim == 1 {
                    let d = (cand[0] - other[0]).abs();
                    d < sep || m - d <= sep
                } else {
                    let dx = cand[0] - other[0];
                    let dy = cand[1] - other[1];
                    dx * dx + dy * dy < sep * sep
                };
                if clash {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if ok {
            let flat = cell.iter().fold(0usize, |acc, &c| acc * cells as usize + c as usize);
            grid[flat].push(placed.len());
            placed.push(cand);
        }
    }
    Ok(placed)
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i64>> {
    if dim == 1 {
        vec![vec![-1], vec![0], vec![1]]
    } else {
        let mut out = Vec::with_capacity(9);
        for a in -1..=1 {
            for b in -1..=1 {
                out.push(vec![a, b]);
            }
        }
        out
    }
}

fn add_noise<R: Rng + ?Sized>(pixels: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        for v in pixels.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
}

/// How the rotations of the planted copies are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationDraw {
    /// Independent uniform draws.
    #[default]
    Uniform,
    /// Copy `j` takes the `j`-th of an equispaced set, cycling: shifts
    /// `−n, …, n − 1` in 1D, the Nyquist design angles in 2D. When `p` is a
    /// multiple of the set size the rotation average is exact.
    Balanced,
}

/// `M(x) = Σ_j F_{τ_j}(x − x_j) + ε(x)` on `{1, …, m}`.
pub fn synthesize_1d<R: Rng + ?Sized>(
    cfg: &MeasurementConfig,
    f: &TargetSignal1D,
    rng: &mut R,
) -> Result<(Micrograph, Placement1D)> {
    synthesize_1d_with(cfg, f, RotationDraw::Uniform, rng)
}

pub fn synthesize_1d_with<R: Rng + ?Sized>(
    cfg: &MeasurementConfig,
    f: &TargetSignal1D,
    draw: RotationDraw,
    rng: &mut R,
) -> Result<(Micrograph, Placement1D)> {
    if cfg.dim != 1 {
        return Err(Error::Config("synthesize_1d needs dim = 1".into()));
    }
    if f.n() != cfg.n {
        return Err(Error::ShapeMismatch {
            expected: format!("signal with n = {}", cfg.n),
            actual: format!("n = {}", f.n()),
        });
    }
    cfg.validate()?;
    let positions: Vec<i64> = place_targets(cfg, rng)?.into_iter().map(|p| p[0]).collect();
    let n = cfg.n as i64;
    let shifts: Vec<i64> = match draw {
        RotationDraw::Uniform => positions.iter().map(|_| rng.random_range(-n..n)).collect(),
        RotationDraw::Balanced => (0..positions.len() as i64).map(|j| j % (2 * n) - n).collect(),
    };
    let mut micrograph = Micrograph::zeros(1, cfg.m);
    for (&x0, &tau) in positions.iter().zip(&shifts) {
        let copy = rotate_unchecked(f, tau);
        for y in -n..n {
            micrograph.pixels[(x0 + y - 1) as usize] += copy.at(y);
        }
    }
    add_noise(&mut micrograph.pixels, cfg.sigma, rng);
    Ok((micrograph, Placement1D { shifts, positions }))
}

/// `M(x) = Σ_j F_{φ_j}(x − x_j) + ε(x)` on `{1, …, m}²` with rotations applied by
/// steering the coefficients.
pub fn synthesize_2d<R: Rng + ?Sized>(
    cfg: &MeasurementConfig,
    v: &CoeffVector,
    basis: &DiscBasis,
    rng: &mut R,
) -> Result<(Micrograph, Placement2D)> {
    synthesize_2d_with(cfg, v, basis, RotationDraw::Uniform, rng)
}

pub fn synthesize_2d_with<R: Rng + ?Sized>(
    cfg: &MeasurementConfig,
    v: &CoeffVector,
    basis: &DiscBasis,
    draw: RotationDraw,
    rng: &mut R,
) -> Result<(Micrograph, Placement2D)> {
    if cfg.dim != 2 {
        return Err(Error::Config("synthesize_2d needs dim = 2".into()));
    }
    if basis.n() != cfg.n {
        return Err(Error::ShapeMismatch {
            expected: format!("basis with n = {}", cfg.n),
            actual: format!("n = {}", basis.n()),
        });
    }
    cfg.validate()?;
    let positions: Vec<(i64, i64)> = place_targets(cfg, rng)?.into_iter().map(|p| (p[0], p[1])).collect();
    let angles: Vec<f64> = match draw {
        RotationDraw::Uniform => positions.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        RotationDraw::Balanced => {
            let design = AngularDesign::nyquist(basis);
            let set = design.angles();
            (0..positions.len()).map(|j| set[j % set.len()]).collect()
        }
    };
    let mut micrograph = Micrograph::zeros(2, cfg.m);
    for (&pos, &phi) in positions.iter().zip(&angles) {
        let image = basis.render(&v.steer(basis, phi))?;
        stamp(&mut micrograph, &image.values, cfg.n, pos);
    }
    add_noise(&mut micrograph.pixels, cfg.sigma, rng);
    Ok((micrograph, Placement2D { positions, angles }))
}

/// Adds a wrapped `4n × 4n` image centred at the 1-based position `pos`.
pub(crate) fn stamp(micrograph: &mut Micrograph, image: &[f64], n: usize, pos: (i64, i64)) {
    let side = 4 * n;
    let n = n as i64;
    let m = micrograph.m;
    for y0 in -n..n {
        for y1 in -n..n {
            let value = image[wrap2(y0, y1, side)];
            if value == 0.0 {
                continue;
            }
            let r = (pos.0 + y0 - 1) as usize;
            let c = (pos.1 + y1 - 1) as usize;
            micrograph.pixels[r * m + c] += value;
        }
    }
}

/// `(2n)⁻¹ Σ F(x)² / σ²`; infinite for `σ = 0`.
pub fn snr_1d(f: &TargetSignal1D, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    f.values.iter().map(|v| v * v).sum::<f64>() / (2.0 * f.n as f64 * sigma * sigma)
}

/// `(π n² σ²)⁻¹ Σ F(x)²`; infinite for `σ = 0`.
pub fn snr_2d(image: &[f64], n: usize, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    image.iter().map(|v| v * v).sum::<f64>() / (PI * (n * n) as f64 * sigma * sigma)
}

/// Noise level giving the requested 1D SNR.
pub fn sigma_for_snr_1d(f: &TargetSignal1D, snr: f64) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() / (2.0 * f.n as f64 * snr)).sqrt()
}

/// Noise level giving the requested 2D SNR.
pub fn sigma_for_snr_2d(image: &[f64], n: usize, snr: f64) -> f64 {
    (image.iter().map(|v| v * v).sum::<f64>() / (PI * (n * n) as f64 * snr)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSize;

    #[test]
    fn rotate_examples() {
        let spike = TargetSignal1D::delta(2, 0, 1.0).unwrap();
        assert_eq!(rotate1d(&spike, 1).unwrap(), TargetSignal1D::delta(2, -1, 1.0).unwrap());
        let f = TargetSignal1D::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rotate1d(&f, 0).unwrap(), f);
        // A shift of 2 is the shift −2 modulo 4.
        assert_eq!(rotate1d(&f, -2).unwrap().values(), &[3.0, 4.0, 1.0, 2.0]);
        assert!(rotate1d(&f, 2).is_err());
        assert!(rotate1d(&f, -3).is_err());
    }

    #[test]
    fn rotations_compose() {
        let f = TargetSignal1D::new(3, vec![0.5, -1.0, 2.0, 3.5, 0.0, 1.25]).unwrap();
        for a in -3..3 {
            for b in -3..3 {
                let ab = rotate1d(&rotate1d(&f, a).unwrap(), b).unwrap();
                let direct = rotate1d(&f, centered_mod(a + b, 3)).unwrap();
                assert_eq!(ab, direct);
            }
        }
    }

    #[test]
    fn small_placement_respects_separation() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 40,
            n: 2,
            p: 2,
            sigma: 0.0,
            seed: 0,
        };
        for seed in 0..50 {
            let mut rng = micrograph_rng(seed, 0);
            let pos = place_targets(&cfg, &mut rng).unwrap();
            let d = (pos[0][0] - pos[1][0]).abs();
            assert!(d >= 8);
            assert!(40 - d > 8);
            for p in &pos {
                assert!((3..=39).contains(&p[0]));
            }
        }
    }

    #[test]
    fn infeasible_placement_reports_failure() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 16,
            n: 2,
            p: 3,
            sigma: 0.0,
            seed: 0,
        };
        let err = place_targets(&cfg, &mut micrograph_rng(1, 0)).unwrap_err();
        match err {
            Error::Placement { placed, requested, .. } => {
                assert!(placed < 3);
                assert_eq!(requested, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn density_rule_and_feasibility() {
        let cfg = MeasurementConfig::from_density(2, 4000, 17, 0.1, 1.0, 0);
        assert_eq!(cfg.p, 5536);
        // 5536 discs of exclusion diameter 68 do not fit in 4000².
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg1 = MeasurementConfig::from_density(1, 1000, 10, 0.2, 1.0, 0);
        assert_eq!(cfg1.p, 20);
        assert!((cfg1.gamma() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn dense_2d_placement_is_separated() {
        let cfg = MeasurementConfig::from_density(2, 4000, 17, 0.02, 1.0, 0);
        cfg.validate().unwrap();
        let pos = place_targets(&cfg, &mut micrograph_rng(9, 0)).unwrap();
        assert_eq!(pos.len(), cfg.p);
        for i in 0..pos.len() {
            assert!((18..=3983).contains(&pos[i][0]) && (18..=3983).contains(&pos[i][1]));
            for j in 0..i {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                assert!(dx * dx + dy * dy >= 68 * 68);
            }
        }
    }

    #[test]
    fn synthesis_1d_noiseless_subtracts_to_zero() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 400,
            n: 5,
            p: 8,
            sigma: 0.0,
            seed: 3,
        };
        let mut rng = micrograph_rng(3, 0);
        let f = TargetSignal1D::random(5, &mut rng);
        let (mut mic, place) = synthesize_1d(&cfg, &f, &mut rng).unwrap();
        let total: f64 = mic.pixels.iter().sum();
        let want = 8.0 * f.values().iter().sum::<f64>();
        assert!((total - want).abs() < 1e-12 * want.abs().max(1.0));
        for (&x0, &tau) in place.positions.iter().zip(&place.shifts) {
            let copy = rotate1d(&f, tau).unwrap();
            for y in -5..5 {
                mic.pixels[(x0 + y - 1) as usize] -= copy.at(y);
            }
        }
        assert!(mic.pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 500,
            n: 4,
            p: 10,
            sigma: 0.7,
            seed: 12,
        };
        let f = TargetSignal1D::random(4, &mut micrograph_rng(0, 99));
        let a = synthesize_1d(&cfg, &f, &mut micrograph_rng(12, 4)).unwrap();
        let b = synthesize_1d(&cfg, &f, &mut micrograph_rng(12, 4)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_1d(&cfg, &f, &mut micrograph_rng(12, 5)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn empty_measurements() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 64,
            n: 2,
            p: 0,
            sigma: 0.0,
            seed: 0,
        };
        let f = TargetSignal1D::delta(2, 0, 1.0).unwrap();
        let (mic, _) = synthesize_1d(&cfg, &f, &mut micrograph_rng(0, 0)).unwrap();
        assert!(mic.pixels.iter().all(|&v| v == 0.0));
        let basis = DiscBasis::build(2, BasisSize::Count(3)).unwrap();
        let cfg2 = MeasurementConfig { dim: 2, ..cfg };
        let v = basis.random_coeffs(&mut micrograph_rng(0, 1));
        let (mic2, _) = synthesize_2d(&cfg2, &v, &basis, &mut micrograph_rng(0, 0)).unwrap();
        assert!(mic2.pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_statistics() {
        let cfg = MeasurementConfig {
            dim: 1,
            m: 1_000_000,
            n: 4,
            p: 0,
            sigma: 1.5,
            seed: 0,
        };
        let f = TargetSignal1D::delta(4, 0, 1.0).unwrap();
        let (mic, _) = synthesize_1d(&cfg, &f, &mut micrograph_rng(21, 0)).unwrap();
        assert!(mic.mean().abs() < 4.0 * 1.5 / 1000.0);
        assert!((mic.variance() - 2.25).abs() < 0.1 * 2.25);
    }

    #[test]
    fn single_copy_window_equals_rendered_image() {
        let n = 5;
        let basis = DiscBasis::build(n, BasisSize::Count(12)).unwrap();
        let v = basis.random_coeffs(&mut micrograph_rng(4, 0));
        let cfg = MeasurementConfig {
            dim: 2,
            m: 60,
            n,
            p: 1,
            sigma: 0.0,
            seed: 0,
        };
        let (mic, place) = synthesize_2d(&cfg, &v, &basis, &mut micrograph_rng(4, 1)).unwrap();
        let (x0, y0) = place.positions[0];
        let img = basis.render(&v.steer(&basis, place.angles[0])).unwrap();
        let mut inside = 0.0;
        for a in -(n as i64)..n as i64 {
            for b in -(n as i64)..n as i64 {
                let got = mic.pixels[((x0 + a - 1) as usize) * 60 + (y0 + b - 1) as usize];
                assert_eq!(got, img.at(a, b));
                inside += got;
            }
        }
        let total: f64 = mic.pixels.iter().sum();
        assert!((total - inside).abs() < 1e-12);
    }

    #[test]
    fn snr_definitions() {
        let f = TargetSignal1D::new(2, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(snr_1d(&f, 1.0), 1.0);
        assert!((snr_1d(&f, 2.0) - 0.25).abs() < 1e-15);
        assert!(snr_1d(&f, 0.0).is_infinite());
        let n = 3;
        let total = PI * (n * n) as f64;
        let image = vec![total.sqrt()];
        assert!((snr_2d(&image, n, 1.0) - 1.0).abs() < 1e-12);
        let sigma = sigma_for_snr_2d(&image, n, 1e-2);
        assert!((snr_2d(&image, n, sigma) - 1e-2).abs() < 1e-14);
        let s1 = sigma_for_snr_1d(&f, 100.0);
        assert!((snr_1d(&f, s1) - 100.0).abs() < 1e-10);
    }
}
