//! Experiment descriptions and the pipeline stages driven by the command-line
//! tool: simulate, accumulate, recover and error-versus-count sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{CoeffVector, DiscBasis};
use crate::error::{Error, Result};
use crate::estimate::{bin_reduce, debias_1d, debias_2d, relative_error, MomentAccumulator};
use crate::invariants::{bin_map, AngularDesign, BinMap, ForwardModel, InvariantTensor2D};
use crate::io::{self, BinnedFile, MicrographHeader};
use crate::model::{
    micrograph_rng, sigma_for_snr_1d, sigma_for_snr_2d, synthesize_1d_with, synthesize_2d_with, MeasurementConfig,
    Micrograph, RotationDraw, TargetSignal1D,
};
use crate::recover::{
    align_error_1d, bispectrum_direct, bispectrum_from_v, invert_bispectrum, recover_2d, BinnedTarget,
    OptimizerOptions, PhaseMethod, RecoveryReport, Target2D, UnbinnedTarget,
};

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

fn yes() -> bool {
    true
}

fn default_d() -> usize {
    30
}

fn default_b1() -> f64 {
    crate::invariants::DEFAULT_B1
}

fn default_b2() -> f64 {
    crate::invariants::DEFAULT_B2
}

/// Which target is planted. Without `values` a random target is drawn from
/// `seed` (the experiment seed when absent).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default)]
    pub seed: Option<u64>,
    /// 1D only: `F(−n), …, F(n − 1)`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

/// JSON experiment description. The measurement part follows
/// `{ "dim", "m", "n", "gamma" | "p", "sigma", "seed" }`; everything else has
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dim: u8,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Alternative to `sigma`, relative to the target.
    #[serde(default)]
    pub snr: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Number of micrographs to simulate.
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub rotations: RotationDraw,
    #[serde(default)]
    pub target: TargetSpec,
    /// 2D basis size.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_b1")]
    pub b1: f64,
    #[serde(default = "default_b2")]
    pub b2: f64,
    /// 2D recovery fits bin sums rather than the full tensor.
    #[serde(default = "yes")]
    pub binned: bool,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default)]
    pub phase: PhaseMethod,
    /// Copy counts (1D) or micrograph counts (2D) for `sweep`.
    #[serde(default)]
    pub schedule: Vec<usize>,
    #[serde(default = "ten")]
    pub trials: usize,
    /// Whether `sweep` also reconstructs the target at every point.
    #[serde(default = "yes")]
    pub sweep_recover: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory for cached bases.
    #[serde(default)]
    pub basis_cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dim != 1 && self.dim != 2 {
            return fail(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        match (self.gamma, self.p) {
            (Some(_), Some(_)) => return fail("give either gamma or p, not both".into()),
            (None, None) => return fail("one of gamma or p is required".into()),
            (Some(g), None) if !(g > 0.0 && g.is_finite()) => return fail(format!("gamma must be positive, got {g}")),
            _ => {}
        }
        match (self.sigma, self.snr) {
            (Some(_), Some(_)) => return fail("give either sigma or snr, not both".into()),
            (None, Some(s)) if s.is_nan() || s <= 0.0 => return fail(format!("snr must be positive, got {s}")),
            _ => {}
        }
        if let Some(values) = &self.target.values {
            if self.dim != 1 {
                return fail("target values are only supported in 1D".into());
            }
            if values.len() != 2 * self.n {
                return fail(format!("target needs 2n = {} values, got {}", 2 * self.n, values.len()));
            }
        }
        if self.dim == 2 && self.d == 0 {
            return fail("d must be positive".into());
        }
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return fail("bin densities must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))
    }

    fn target_seed(&self) -> u64 {
        self.target.seed.unwrap_or(self.seed)
    }

    /// The planted target; bases are read from or written to `basis_cache`.
    pub fn build_target(&self) -> Result<Target> {
        // A stream no micrograph uses.
        let mut rng = ChaCha8Rng::seed_from_u64(self.target_seed());
        rng.set_stream(u64::MAX);
        if self.dim == 1 {
            let f = match &self.target.values {
                Some(values) => TargetSignal1D::new(self.n, values.clone())?,
                None => TargetSignal1D::random(self.n, &mut rng),
            };
            return Ok(Target::Signal(f));
        }
        let basis = io::load_or_build_basis(self.basis_cache.as_deref(), self.n, self.d)?;
        let coeffs = basis.random_coeffs(&mut rng);
        let pixels = basis.render(&coeffs)?.values;
        Ok(Target::Image { basis, coeffs, pixels })
    }

    /// Measurement parameters with `p` and `σ` resolved against the target.
    pub fn measurement(&self, target: &Target) -> Result<MeasurementConfig> {
        let sigma = match (self.sigma, self.snr) {
            (Some(s), _) => s,
            (None, Some(snr)) => target.sigma_for_snr(snr),
            (None, None) => 0.0,
        };
        let cfg = match (self.gamma, self.p) {
            (_, Some(p)) => MeasurementConfig {
                dim: self.dim,
                m: self.m,
                n: self.n,
                p,
                sigma,
                seed: self.seed,
            },
            (Some(g), None) => MeasurementConfig::from_density(self.dim, self.m, self.n, g, sigma, self.seed),
            (None, None) => return Err(Error::Config("one of gamma or p is required".into())),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub enum Target {
    Signal(TargetSignal1D),
    Image {
        basis: DiscBasis,
        coeffs: CoeffVector,
        /// Rendered on the wrapped `4n × 4n` grid.
        pixels: Vec<f64>,
    },
}

impl Target {
    pub fn sigma_for_snr(&self, snr: f64) -> f64 {
        match self {
            Target::Signal(f) => sigma_for_snr_1d(f, snr),
            Target::Image { basis, pixels, .. } => sigma_for_snr_2d(pixels, basis.n(), snr),
        }
    }

    fn synthesize(&self, cfg: &MeasurementConfig, draw: RotationDraw, index: u64) -> Result<Micrograph> {
        let mut rng = micrograph_rng(cfg.seed, index);
        Ok(match self {
            Target::Signal(f) => synthesize_1d_with(cfg, f, draw, &mut rng)?.0,
            Target::Image { basis, coeffs, .. } => synthesize_2d_with(cfg, coeffs, basis, draw, &mut rng)?.0,
        })
    }
}

pub fn micrograph_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("micrograph_{index:05}.bin"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `spec.count` micrographs to `out`; micrograph `i` uses noise stream
/// `i` of the experiment seed. With `truth`, a 2D run also stores the exact
/// invariant of the target (`target_tensor.bin` or `target_binned.bin`).
pub fn simulate(spec: &ExperimentSpec, target: &Target, out: &Path, truth: bool) -> Result<Vec<PathBuf>> {
    let cfg = spec.measurement(target)?;
    create_dir(out)?;
    let header = MicrographHeader::of(&cfg);
    let paths = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mic = target.synthesize(&cfg, spec.rotations, i as u64)?;
            let path = micrograph_path(out, i);
            io::write_micrograph(&path, &header, &mic)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    if truth {
        if let Target::Image { basis, coeffs, .. } = target {
            let model = ForwardModel::new(basis.clone(), AngularDesign::nyquist(basis));
            let tensor = model.forward(coeffs)?;
            if spec.binned {
                let map = bin_map(spec.n, spec.b1, spec.b2)?;
                let values = bin_reduce(&tensor, &map)?;
                io::write_binned(
                    &out.join("target_binned.bin"),
                    &map,
                    &values,
                    basis.dim(),
                    basis.max_order(),
                )?;
            } else {
                io::write_tensor(&out.join("target_tensor.bin"), &tensor, basis.dim(), basis.max_order())?;
            }
        }
    }
    Ok(paths)
}

/// Micrograph files named by `inputs`: files as given, directories expanded to
/// their `.bin` micrographs in name order.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            for entry in fs::read_dir(input).map_err(|e| Error::io(input, e))? {
                let path = entry.map_err(|e| Error::io(input, e))?.path();
                if path.extension().is_some_and(|e| e == "bin") && io::peek_magic(&path)? == io::MICROGRAPH_MAGIC {
                    found.push(path);
                }
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn check_header(path: &Path, header: &MicrographHeader, cfg: &MeasurementConfig) -> Result<()> {
    if (header.dim, header.m, header.n) != (cfg.dim, cfg.m, cfg.n) || header.sigma != cfg.sigma {
        return Err(Error::format(
            path,
            format!(
                "header (dim {}, m {}, n {}, sigma {}) does not match the configuration (dim {}, m {}, n {}, sigma {})",
                header.dim, header.m, header.n, header.sigma, cfg.dim, cfg.m, cfg.n, cfg.sigma
            ),
        ));
    }
    Ok(())
}

/// Absorbs `files` in order, writing `checkpoint` after every `every` files
/// and at the end. A resumed accumulator skips the files it already holds,
/// so resuming over the same file list reproduces an uninterrupted run.
pub fn accumulate(
    cfg: &MeasurementConfig,
    files: &[PathBuf],
    resume: Option<MomentAccumulator>,
    checkpoint: &Path,
    every: usize,
) -> Result<MomentAccumulator> {
    let mut acc = match resume {
        Some(acc) => acc,
        None => MomentAccumulator::empty(cfg.dim, cfg.m, cfg.n)?,
    };
    if (acc.dim, acc.m, acc.n) != (cfg.dim, cfg.m, cfg.n) {
        return Err(Error::ShapeMismatch {
            expected: format!("checkpoint for dim {}, m {}, n {}", cfg.dim, cfg.m, cfg.n),
            actual: format!("dim {}, m {}, n {}", acc.dim, acc.m, acc.n),
        });
    }
    let done = acc.count as usize;
    if done > files.len() {
        return Err(Error::invalid(format!(
            "checkpoint holds {done} micrographs but only {} inputs were given",
            files.len()
        )));
    }
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    for chunk in files[done..].chunks(every.max(1)) {
        let batch = chunk
            .par_iter()
            .map(|path| {
                let (header, mic) = io::read_micrograph(path)?;
                check_header(path, &header, cfg)?;
                Ok(mic)
            })
            .collect::<Result<Vec<_>>>()?;
        acc.absorb_all(&batch)?;
        io::write_checkpoint(checkpoint, &acc)?;
    }
    io::write_checkpoint(checkpoint, &acc)?;
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report1D {
    pub n: usize,
    pub measurements: u64,
    pub t_hat: f64,
    /// Relative error of the estimated bispectrum.
    pub invariant_error: f64,
    /// Shift-aligned relative error of the recovered signal.
    pub aligned_error: f64,
    pub phase: PhaseMethod,
    pub signal: Vec<f64>,
    pub wall_seconds: f64,
}

/// Debiases the accumulated moments and inverts the bispectrum.
pub fn recover1d(
    spec: &ExperimentSpec,
    cfg: &MeasurementConfig,
    f: &TargetSignal1D,
    acc: &MomentAccumulator,
) -> Result<Report1D> {
    let clock = Instant::now();
    let (v_hat, t_hat) = debias_1d(acc, cfg.sigma, cfg.gamma())?;
    let b = bispectrum_from_v(&v_hat, cfg.n)?;
    let invariant_error = b.relative_distance(&bispectrum_direct(f));
    let estimate = invert_bispectrum(&b, spec.phase)?;
    Ok(Report1D {
        n: cfg.n,
        measurements: acc.count,
        t_hat,
        invariant_error,
        aligned_error: align_error_1d(&estimate, f)?,
        phase: spec.phase,
        signal: estimate.values().to_vec(),
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}

/// What a 2D recovery starts from.
#[derive(Debug, Clone)]
pub enum Invariants2D {
    Moments(MomentAccumulator),
    Tensor(InvariantTensor2D),
    Binned(BinnedFile),
}

impl Invariants2D {
    /// Reads a checkpoint, full tensor or binned file, by its magic line.
    pub fn load(path: &Path) -> Result<Self> {
        let magic = io::peek_magic(path)?;
        match magic.as_str() {
            io::CHECKPOINT_MAGIC => Ok(Self::Moments(io::read_checkpoint(path)?)),
            io::TENSOR_MAGIC => Ok(Self::Tensor(io::read_tensor(path)?)),
            io::BINNED_MAGIC => Ok(Self::Binned(io::read_binned(path)?)),
            other => Err(Error::format(path, format!("unexpected file type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report2D {
    pub n: usize,
    pub d: usize,
    pub measurements: u64,
    pub bins: usize,
    /// Relative error of the binned invariant.
    pub invariant_error: f64,
    pub recovery: RecoveryReport,
    /// Recovered coefficients as `(ν, q, re, im)`, rotated onto the target.
    pub coefficients: Vec<(i32, u32, f64, f64)>,
}

/// Estimates (or takes) the invariant and fits coefficients to it. Returns the
/// report and the aligned recovered image.
pub fn recover2d(
    spec: &ExperimentSpec,
    cfg: &MeasurementConfig,
    basis: &DiscBasis,
    truth: &CoeffVector,
    input: Invariants2D,
) -> Result<(Report2D, Vec<f64>)> {
    let model = ForwardModel::new(basis.clone(), AngularDesign::nyquist(basis));
    let map = bin_map(cfg.n, spec.b1, spec.b2)?;
    let truth_binned = bin_reduce(&model.forward(truth)?, &map)?;
    let mut measurements = 0;
    let (tensor, binned): (Option<InvariantTensor2D>, Vec<Complex64>) = match input {
        Invariants2D::Moments(acc) => {
            measurements = acc.count;
            let t = debias_2d(&acc, cfg.sigma, cfg.gamma(), model.design().len())?;
            let b = bin_reduce(&t, &map)?;
            (Some(t), b)
        }
        Invariants2D::Tensor(t) => {
            let b = bin_reduce(&t, &map)?;
            (Some(t), b)
        }
        Invariants2D::Binned(file) => {
            let stored = bin_map(file.n, file.b1, file.b2)?;
            if !stored.same_layout(&map) {
                return Err(Error::Config(format!(
                    "binned input uses b1 = {}, b2 = {} but the configuration has b1 = {}, b2 = {}",
                    file.b1, file.b2, spec.b1, spec.b2
                )));
            }
            (None, file.values)
        }
    };
    let invariant_error = relative_error(&binned, &truth_binned);
    let target = if spec.binned {
        Target2D::Binned(BinnedTarget::new(&model, map.clone(), binned)?)
    } else {
        let t = tensor.ok_or_else(|| Error::Config("unbinned recovery needs a full tensor".into()))?;
        Target2D::Unbinned(UnbinnedTarget::new(&model, &t)?)
    };
    let (v, recovery) = recover_2d(&model, &target, &spec.optimizer, Some(truth))?;
    let aligned = v.steer(basis, recovery.aligned_angle.unwrap_or(0.0));
    let image = basis.render(&aligned)?.values;
    let coefficients = basis
        .indices()
        .iter()
        .zip(&aligned.values)
        .map(|(idx, z)| (idx.order, idx.radial, z.re, z.im))
        .collect();
    let report = Report2D {
        n: cfg.n,
        d: basis.dim(),
        measurements,
        bins: map.len(),
        invariant_error,
        recovery,
        coefficients,
    };
    Ok((report, image))
}

/// One averaged point of an error-versus-count sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub count: usize,
    pub err_invariant_binned: f64,
    pub err_reconstruction: f64,
    pub wall_seconds: f64,
    pub seed: u64,
}

fn mean_finite(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, k) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        sum / k as f64
    }
}

/// Runs `spec.schedule`, handing each averaged row to `emit` as soon as it is
/// complete. Trial `t` uses seed `spec.seed + t`, so a point's result does not
/// depend on the rest of the schedule.
///
/// In 1D a point is a single measurement holding `count` copies at the
/// configured density; the invariant error is that of the bispectrum. In 2D a
/// point is `count` micrographs of the configured size; the invariant error is
/// that of the binned `Ŝ`. A failed reconstruction counts as `NaN` and is left
/// out of the average.
pub fn sweep(
    spec: &ExperimentSpec,
    target: &Target,
    mut emit: impl FnMut(&SweepRow) -> Result<()>,
) -> Result<Vec<SweepRow>> {
    if spec.schedule.is_empty() {
        return Err(Error::Config("sweep needs a nonempty schedule".into()));
    }
    let base = spec.measurement(target)?;
    let mut rows = Vec::with_capacity(spec.schedule.len());
    for &count in &spec.schedule {
        let clock = Instant::now();
        let errors: Vec<(f64, f64)> = match target {
            Target::Signal(f) => {
                let gamma = spec.gamma.unwrap_or_else(|| base.gamma());
                (0..spec.trials)
                    .into_par_iter()
                    .map(|t| sweep_point_1d(spec, f, gamma, base.sigma, count, t as u64))
                    .collect::<Result<_>>()?
            }
            Target::Image { basis, coeffs, .. } => {
                let ctx = Sweep2D::new(spec, basis, coeffs)?;
                (0..spec.trials)
                    .map(|t| ctx.point(spec, target, &base, count, t as u64))
                    .collect::<Result<_>>()?
            }
        };
        let row = SweepRow {
            count,
            err_invariant_binned: mean_finite(errors.iter().map(|e| e.0)),
            err_reconstruction: mean_finite(errors.iter().map(|e| e.1)),
            wall_seconds: clock.elapsed().as_secs_f64(),
            seed: spec.seed,
        };
        emit(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

fn sweep_point_1d(
    spec: &ExperimentSpec,
    f: &TargetSignal1D,
    gamma: f64,
    sigma: f64,
    count: usize,
    trial: u64,
) -> Result<(f64, f64)> {
    let n = f.n();
    let m = ((count * n) as f64 / gamma).ceil().max((8 * n) as f64) as usize;
    let cfg = MeasurementConfig {
        dim: 1,
        m,
        n,
        p: count,
        sigma,
        seed: spec.seed.wrapping_add(trial),
    };
    let target = Target::Signal(f.clone());
    let mic = target.synthesize(&cfg, spec.rotations, count as u64)?;
    let mut acc = MomentAccumulator::empty(1, m, n)?;
    acc.absorb(&mic)?;
    let (v_hat, _) = debias_1d(&acc, sigma, cfg.gamma())?;
    let b = bispectrum_from_v(&v_hat, n)?;
    let invariant = b.relative_distance(&bispectrum_direct(f));
    let reconstruction = if spec.sweep_recover {
        invert_bispectrum(&b, spec.phase)
            .and_then(|g| align_error_1d(&g, f))
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok((invariant, reconstruction))
}

struct Sweep2D<'a> {
    model: ForwardModel,
    map: BinMap,
    truth: &'a CoeffVector,
    truth_binned: Vec<Complex64>,
}

impl<'a> Sweep2D<'a> {
    fn new(spec: &ExperimentSpec, basis: &DiscBasis, truth: &'a CoeffVector) -> Result<Self> {
        let model = ForwardModel::new(basis.clone(), AngularDesign::nyquist(basis));
        let map = bin_map(basis.n(), spec.b1, spec.b2)?;
        let truth_binned = bin_reduce(&model.forward(truth)?, &map)?;
        Ok(Self {
            model,
            map,
            truth,
            truth_binned,
        })
    }

    fn point(
        &self,
        spec: &ExperimentSpec,
        target: &Target,
        base: &MeasurementConfig,
        count: usize,
        trial: u64,
    ) -> Result<(f64, f64)> {
        let cfg = MeasurementConfig {
            seed: spec.seed.wrapping_add(trial),
            ..*base
        };
        let mut acc = MomentAccumulator::empty(2, cfg.m, cfg.n)?;
        for i in 0..count {
            acc.absorb(&target.synthesize(&cfg, spec.rotations, i as u64)?)?;
        }
        let tensor = debias_2d(&acc, cfg.sigma, cfg.gamma(), self.model.design().len())?;
        let binned = bin_reduce(&tensor, &self.map)?;
        let invariant = relative_error(&binned, &self.truth_binned);
        let reconstruction = if spec.sweep_recover {
            let fit = if spec.binned {
                BinnedTarget::new(&self.model, self.map.clone(), binned).map(Target2D::Binned)
            } else {
                UnbinnedTarget::new(&self.model, &tensor).map(Target2D::Unbinned)
            };
            fit.and_then(|t| recover_2d(&self.model, &t, &spec.optimizer, Some(self.truth)))
                .ok()
                .and_then(|(_, r)| r.aligned_error)
                .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        Ok((invariant, reconstruction))
    }
}
