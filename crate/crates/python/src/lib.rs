//! Python bindings: the 1D pipeline, the 2D steerable basis and forward map,
//! and the self-test.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mtdrot::basis::{BasisSize, CoeffVector, DiscBasis};
use mtdrot::estimate::{debias_1d, MomentAccumulator};
use mtdrot::invariants::{self, AngularDesign};
use mtdrot::model::{self, micrograph_rng, MeasurementConfig, Micrograph, RotationDraw, TargetSignal1D};
use mtdrot::recover::{self, PhaseMethod};
use mtdrot::Error;

create_exception!(
    pymtdrot,
    MtdrotError,
    PyRuntimeError,
    "Inversion, placement or optimizer failure."
);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::ShapeMismatch { .. } => PyValueError::new_err(e.to_string()),
        Error::Io { .. } | Error::Format { .. } => PyOSError::new_err(e.to_string()),
        _ => MtdrotError::new_err(e.to_string()),
    }
}

fn signal(values: Vec<f64>) -> PyResult<TargetSignal1D> {
    if values.is_empty() || !values.len().is_multiple_of(2) {
        return Err(PyValueError::new_err(
            "a signal needs an even, nonzero number of samples",
        ));
    }
    TargetSignal1D::new(values.len() / 2, values).map_err(py_err)
}

/// `F((x + τ) mod 2n)` for `τ ∈ {−n, …, n − 1}`.
#[pyfunction]
fn rotate1d(values: Vec<f64>, tau: i64) -> PyResult<Vec<f64>> {
    let f = signal(values)?;
    Ok(model::rotate1d(&f, tau).map_err(py_err)?.values().to_vec())
}

/// Rotation-averaged triple correlation, flattened over `(x₁, x₂)` with lags
/// wrapped modulo `4n`.
#[pyfunction]
fn auto3_v(values: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(invariants::auto3_v(&signal(values)?))
}

/// Recover a signal from its triple correlation, up to a cyclic shift.
#[pyfunction]
#[pyo3(signature = (v, n, method = "recursive"))]
fn invert_v(v: Vec<f64>, n: usize, method: &str) -> PyResult<Vec<f64>> {
    let method = match method {
        "recursive" => PhaseMethod::Recursive,
        "averaged" => PhaseMethod::Averaged,
        other => return Err(PyValueError::new_err(format!("unknown phase method {other:?}"))),
    };
    let b = recover::bispectrum_from_v(&v, n).map_err(py_err)?;
    Ok(recover::invert_bispectrum(&b, method)
        .map_err(py_err)?
        .values()
        .to_vec())
}

/// Relative error after the best cyclic shift.
#[pyfunction]
fn align_error_1d(estimate: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    recover::align_error_1d(&signal(estimate)?, &signal(truth)?).map_err(py_err)
}

/// Micrograph `index` of the seeded 1D measurement stream.
#[pyfunction]
#[pyo3(signature = (values, m, p, sigma, seed, index = 0, balanced = false))]
fn simulate_1d(
    values: Vec<f64>,
    m: usize,
    p: usize,
    sigma: f64,
    seed: u64,
    index: u64,
    balanced: bool,
) -> PyResult<Vec<f64>> {
    let f = signal(values)?;
    let cfg = MeasurementConfig {
        dim: 1,
        m,
        n: f.n(),
        p,
        sigma,
        seed,
    };
    let draw = if balanced {
        RotationDraw::Balanced
    } else {
        RotationDraw::Uniform
    };
    let (mic, _) = model::synthesize_1d_with(&cfg, &f, draw, &mut micrograph_rng(seed, index)).map_err(py_err)?;
    Ok(mic.pixels)
}

#[pyfunction]
fn autocorr3_1d(pixels: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    let mic = Micrograph {
        dim: 1,
        m: pixels.len(),
        pixels,
    };
    invariants::autocorr3_1d(&mic, n).map_err(py_err)
}

/// Masked triple autocorrelation of a row-major `m × m` micrograph.
#[pyfunction]
fn autocorr3_2d(pixels: Vec<f64>, m: usize, n: usize) -> PyResult<Vec<f64>> {
    if pixels.len() != m * m {
        return Err(PyValueError::new_err(format!(
            "expected {} pixels, got {}",
            m * m,
            pixels.len()
        )));
    }
    invariants::autocorr3_2d(&Micrograph { dim: 2, m, pixels }, n).map_err(py_err)
}

/// Debiased `(V̂, T̂)` from equally sized 1D micrographs.
#[pyfunction]
fn estimate_v(micrographs: Vec<Vec<f64>>, n: usize, sigma: f64, gamma: f64) -> PyResult<(Vec<f64>, f64)> {
    let m = micrographs.first().map_or(0, Vec::len);
    let mut acc = MomentAccumulator::empty(1, m, n).map_err(py_err)?;
    for pixels in micrographs {
        acc.absorb(&Micrograph { dim: 1, m, pixels }).map_err(py_err)?;
    }
    debias_1d(&acc, sigma, gamma).map_err(py_err)
}

/// Steerable basis of a disc of radius `n` sampled on a `4n × 4n` grid.
#[pyclass(frozen, module = "pymtdrot")]
struct Basis {
    inner: DiscBasis,
}

impl Basis {
    fn coeffs(&self, values: Vec<Complex64>) -> PyResult<CoeffVector> {
        if values.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coefficients, got {}",
                self.inner.dim(),
                values.len()
            )));
        }
        Ok(CoeffVector { values })
    }
}

#[pymethods]
impl Basis {
    #[new]
    fn new(n: usize, d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: DiscBasis::build(n, BasisSize::Count(d)).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    /// `(order, radial index, radial frequency)` of each basis function.
    #[getter]
    fn indices(&self) -> Vec<(i32, u32, f64)> {
        self.inner
            .indices()
            .iter()
            .map(|i| (i.order, i.radial, i.root))
            .collect()
    }

    /// Coefficients of a random real image.
    fn random_coeffs(&self, seed: u64) -> Vec<Complex64> {
        self.inner.random_coeffs(&mut ChaCha8Rng::seed_from_u64(seed)).values
    }

    /// The image on the `side × side` grid, row-major, origin at index 0.
    fn render(&self, coeffs: Vec<Complex64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.render(&self.coeffs(coeffs)?).map_err(py_err)?.values)
    }

    /// Rotate the image described by `coeffs` by `phi` radians.
    fn steer(&self, coeffs: Vec<Complex64>, phi: f64) -> PyResult<Vec<Complex64>> {
        Ok(self.coeffs(coeffs)?.steer(&self.inner, phi).values)
    }
}

/// Forward map `v ↦ Ŝ` at the Nyquist angular design.
#[pyclass(frozen, module = "pymtdrot")]
struct ForwardModel {
    basis: Py<Basis>,
    inner: invariants::ForwardModel,
}

#[pymethods]
impl ForwardModel {
    #[new]
    fn new(basis: Py<Basis>, py: Python<'_>) -> Self {
        let b = basis.borrow(py).inner.clone();
        let inner = invariants::ForwardModel::new(b.clone(), AngularDesign::nyquist(&b));
        Self { basis, inner }
    }

    #[getter]
    fn angles(&self) -> usize {
        self.inner.design().len()
    }

    /// `Ŝ(k₁, k₂)` over all frequency pairs, `k₁`-major.
    fn forward(&self, coeffs: Vec<Complex64>, py: Python<'_>) -> PyResult<Vec<Complex64>> {
        let v = self.basis.borrow(py).coeffs(coeffs)?;
        Ok(self.inner.forward(&v).map_err(py_err)?.values)
    }

    /// `∂Ŝ(k₁, k₂)/∂α_i` for every coefficient, at flat frequency indices.
    fn gradient_at(&self, coeffs: Vec<Complex64>, k1: usize, k2: usize, py: Python<'_>) -> PyResult<Vec<Complex64>> {
        let v = self.basis.borrow(py).coeffs(coeffs)?;
        self.inner.gradient_at(&v, k1, k2).map_err(py_err)
    }
}

/// `(name, value, tolerance, passed)` for each built-in check.
#[pyfunction]
fn selftest() -> Vec<(String, f64, f64, bool)> {
    mtdrot::selftest::run()
        .into_iter()
        .map(|c| (c.name.to_string(), c.value, c.tolerance, c.passed()))
        .collect()
}

#[pymodule]
pub fn pymtdrot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MtdrotError", m.py().get_type::<MtdrotError>())?;
    m.add_class::<Basis>()?;
    m.add_class::<ForwardModel>()?;
    m.add_function(wrap_pyfunction!(rotate1d, m)?)?;
    m.add_function(wrap_pyfunction!(auto3_v, m)?)?;
    m.add_function(wrap_pyfunction!(invert_v, m)?)?;
    m.add_function(wrap_pyfunction!(align_error_1d, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_1d, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr3_1d, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr3_2d, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_v, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
