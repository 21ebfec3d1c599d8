//! Python bindings for the Dirac-Beltrami spectral laboratory.
//!
//! Exposes the exterior algebra, polynomial multivectors with symbolic
//! differentiation, the identity-verification suite, the Neumann-series
//! solver on random instances, and the divergence-form cross-validation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dirac_beltrami::coefficient::{random_smooth_coefficient, CoefficientStructure};
use dirac_beltrami::montel::{self, FamilyConfig, GenerationMode};
use dirac_beltrami::poly::random_harmonic_multivector;
use dirac_beltrami::solver::SolveOptions;
use dirac_beltrami::verify::CorruptionHook;
use dirac_beltrami::{BoxRegion, GridSpec, SubdomainSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: dirac_beltrami::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Dense multivector over the blade basis of an n-dimensional exterior algebra.
#[pyclass(name = "Multivector")]
#[derive(Clone)]
struct PyMultivector {
    inner: dirac_beltrami::RealMultivector,
}

#[pymethods]
impl PyMultivector {
    #[new]
    fn new(dim: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        if coeffs.len() != 1 << dim {
            return Err(PyValueError::new_err(format!(
                "expected {} coefficients for dimension {dim}",
                1 << dim
            )));
        }
        Ok(PyMultivector {
            inner: dirac_beltrami::Multivector::from_coeffs(dim, coeffs),
        })
    }

    #[staticmethod]
    fn zero(dim: usize) -> Self {
        PyMultivector {
            inner: dirac_beltrami::Multivector::zero(dim),
        }
    }

    #[staticmethod]
    fn scalar(dim: usize, value: f64) -> Self {
        PyMultivector {
            inner: dirac_beltrami::Multivector::scalar(dim, value),
        }
    }

    #[staticmethod]
    fn basis_vector(dim: usize, axis: usize) -> Self {
        PyMultivector {
            inner: dirac_beltrami::Multivector::basis_vector(dim, axis),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn wedge(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: self.inner.wedge(&other.inner).map_err(err)?,
        })
    }

    /// Left interior product self -| other (self must be grade 1).
    fn interior(&self, other: &PyMultivector) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: self.inner.interior(&other.inner).map_err(err)?,
        })
    }

    /// (m+(v) u, m-(v) u) for grade-1 self.
    fn clifford_pair(&self, other: &PyMultivector) -> PyResult<(PyMultivector, PyMultivector)> {
        let (p, m) = self.inner.clifford_pair(&other.inner).map_err(err)?;
        Ok((PyMultivector { inner: p }, PyMultivector { inner: m }))
    }

    fn grade_project(&self, k: usize) -> PyResult<PyMultivector> {
        Ok(PyMultivector {
            inner: self.inner.grade_project(k).map_err(err)?,
        })
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn inner_product(&self, other: &PyMultivector) -> f64 {
        self.inner.inner(&other.inner)
    }

    fn __add__(&self, other: &PyMultivector) -> PyMultivector {
        PyMultivector {
            inner: self.inner.clone() + other.inner.clone(),
        }
    }

    fn __sub__(&self, other: &PyMultivector) -> PyMultivector {
        PyMultivector {
            inner: self.inner.clone() - other.inner.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Multivector-coefficient polynomial with exact symbolic differentiation.
#[pyclass(name = "PolyMultivector")]
#[derive(Clone)]
struct PyPolyMultivector {
    inner: dirac_beltrami::PolyMultivector,
}

#[pymethods]
impl PyPolyMultivector {
    #[staticmethod]
    fn zero(dim: usize) -> Self {
        PyPolyMultivector {
            inner: dirac_beltrami::PolyMultivector::zero(dim),
        }
    }

    #[staticmethod]
    fn monomial(exponents: Vec<u8>, coeff: &PyMultivector) -> Self {
        PyPolyMultivector {
            inner: dirac_beltrami::PolyMultivector::monomial(&exponents, coeff.inner.clone()),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<PyMultivector> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err("wrong point dimension"));
        }
        Ok(PyMultivector {
            inner: self.inner.evaluate(&x),
        })
    }

    fn d(&self) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.d(),
        }
    }

    fn delta(&self) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.delta(),
        }
    }

    fn dirac(&self, plus: bool) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.dirac(plus),
        }
    }

    fn laplacian(&self) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.laplacian(),
        }
    }

    fn max_coeff_abs(&self) -> f64 {
        self.inner.max_coeff_abs()
    }

    fn scale(&self, s: f64) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.scale(s),
        }
    }

    fn __add__(&self, other: &PyPolyMultivector) -> PyPolyMultivector {
        PyPolyMultivector {
            inner: self.inner.clone() + other.inner.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// H = (d - delta) P for componentwise harmonic P; raises when P is not
/// harmonic.
#[pyfunction]
fn make_monogenic(p: &PyPolyMultivector) -> PyResult<PyPolyMultivector> {
    Ok(PyPolyMultivector {
        inner: dirac_beltrami::make_monogenic(&p.inner).map_err(err)?,
    })
}

/// Orthonormal scalar harmonic polynomials of the exact degree.
#[pyfunction]
fn harmonic_basis(dim: usize, degree: usize) -> Vec<PyPolyMultivector> {
    dirac_beltrami::harmonic_basis(dim, degree)
        .into_iter()
        .map(|p| PyPolyMultivector { inner: p })
        .collect()
}

/// Run the operator identity suite; returns a dict with per-check errors.
#[pyfunction]
#[pyo3(signature = (dim, points, trials = 10, seed = 0, corrupted = false))]
fn verify_identities(
    py: Python<'_>,
    dim: usize,
    points: usize,
    trials: usize,
    seed: u64,
    corrupted: bool,
) -> PyResult<Py<PyDict>> {
    let spec = GridSpec::two_pi(dim, points).map_err(err)?;
    let hook = if corrupted {
        CorruptionHook::FlipDeltaSign
    } else {
        CorruptionHook::None
    };
    let report =
        dirac_beltrami::verify::run_identity_suite(spec, trials, seed, hook).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("all_pass", report.all_pass)?;
    let checks = PyDict::new_bound(py);
    for check in &report.checks {
        let entry = PyDict::new_bound(py);
        entry.set_item("max_error", check.max_error)?;
        entry.set_item("tolerance", check.tolerance)?;
        entry.set_item("pass", check.pass)?;
        checks.set_item(&check.name, entry)?;
    }
    out.set_item("checks", checks)?;
    Ok(out.into())
}

/// Solve one random Dirac-Beltrami instance: a smooth grade-preserving
/// coefficient with sup norm `m_norm` supported in the middle of the box and
/// a random monogenic polynomial input. Returns the solver certificates.
#[pyfunction]
#[pyo3(signature = (dim, points, m_norm, seed = 0, tol = 1e-8, degree = 3))]
fn solve_random(
    py: Python<'_>,
    dim: usize,
    points: usize,
    m_norm: f64,
    seed: u64,
    tol: f64,
    degree: usize,
) -> PyResult<Py<PyDict>> {
    let spec = GridSpec::two_pi(dim, points).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_smooth_coefficient(
        spec,
        CoefficientStructure::GradePreserving,
        m_norm,
        2,
        Some(BoxRegion::new(0.25, 0.75).map_err(err)?),
        &mut rng,
    )
    .map_err(err)?;
    let h = dirac_beltrami::make_monogenic(&random_harmonic_multivector(dim, degree, &mut rng))
        .map_err(err)?;
    let opts = SolveOptions {
        tol,
        ..Default::default()
    };
    let (f, report) = dirac_beltrami::solve(&m, &h, opts).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("converged", report.converged)?;
    out.set_item("iterations", report.iterations)?;
    out.set_item("coefficient_norm", report.coefficient_norm)?;
    out.set_item("observed_rate", report.observed_rate)?;
    out.set_item("predicted_rate", report.predicted_rate)?;
    out.set_item("residual_relative", report.residual.relative)?;
    out.set_item(
        "residual_projected_relative",
        report.residual.projected_relative,
    )?;
    out.set_item("mean_mode_defect", report.mean_mode_defect)?;
    out.set_item("solution_l2_norm", f.flatten_poly().l2_norm(None))?;
    Ok(out.into())
}

/// Divergence-form cross-validation on random symmetric elliptic A:
/// solves the corrector problem, lifts through the Cayley transform and
/// compares the two residuals. Returns one dict per instance.
#[pyfunction]
#[pyo3(signature = (dim, points, lam, lam_up, instances = 3, seed = 0, tol = 1e-8))]
fn divform_cross_validate(
    py: Python<'_>,
    dim: usize,
    points: usize,
    lam: f64,
    lam_up: f64,
    instances: usize,
    seed: u64,
    tol: f64,
) -> PyResult<Vec<Py<PyDict>>> {
    let spec = GridSpec::two_pi(dim, points).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slope = vec![0.0; dim];
    slope[0] = 1.0;
    let mut rows = Vec::new();
    for instance in 0..instances {
        let a = dirac_beltrami::divform::random_symmetric_coefficient(
            spec, lam, lam_up, 2, &mut rng,
        )
        .map_err(err)?;
        let row = dirac_beltrami::divform::cross_validate(&a, &slope, tol, 5000, instance)
            .map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("instance", row.instance)?;
        d.set_item("div_residual_hminus", row.div_residual_hminus)?;
        d.set_item("beltrami_residual", row.beltrami_residual)?;
        d.set_item("cayley_norm", row.cayley_norm)?;
        d.set_item("iterations", row.iterations)?;
        d.set_item("mean_flux", row.mean_flux)?;
        rows.push(d.into());
    }
    Ok(rows)
}

/// Run a small normal-families experiment and return the extraction summary.
#[pyfunction]
#[pyo3(signature = (dim, points, count, seed = 0, rate = 0.7, m_norm = 0.3))]
fn montel_experiment(
    py: Python<'_>,
    dim: usize,
    points: usize,
    count: usize,
    seed: u64,
    rate: f64,
    m_norm: f64,
) -> PyResult<Py<PyDict>> {
    let spec = GridSpec::two_pi(dim, points).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_smooth_coefficient(
        spec,
        CoefficientStructure::GradePreserving,
        m_norm,
        2,
        Some(BoxRegion::new(0.25, 0.75).map_err(err)?),
        &mut rng,
    )
    .map_err(err)?;
    let family = montel::generate_family(
        &m,
        FamilyConfig {
            count,
            degree_max: 3,
            seed,
            mode: GenerationMode::Accumulating { rate },
            solve: SolveOptions::default(),
        },
    )
    .map_err(err)?;
    let sub = SubdomainSpec::symmetric(0.3, 0.2).map_err(err)?;
    let schedule = montel::eps_schedule(family.bound, 5);
    let report = montel::extract_subsequence(&family, sub.u, &schedule, 1e-6).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("bound", family.bound)?;
    out.set_item("chain", report.chain.clone())?;
    out.set_item("chain_length", report.chain.len())?;
    out.set_item("consecutive_distances", report.consecutive_distances.clone())?;
    out.set_item(
        "candidate_residual",
        report.candidate_residual_projected_relative,
    )?;
    out.set_item("candidate_certified", report.candidate_certified)?;
    Ok(out.into())
}

#[pymodule]
fn dirac_beltrami_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMultivector>()?;
    m.add_class::<PyPolyMultivector>()?;
    m.add_function(wrap_pyfunction!(make_monogenic, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_basis, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identities, m)?)?;
    m.add_function(wrap_pyfunction!(solve_random, m)?)?;
    m.add_function(wrap_pyfunction!(divform_cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(montel_experiment, m)?)?;
    Ok(())
}
