use padic_affine::affine::{composition_defect, AffineElement};
use padic_affine::clopen::ClopenSet;
use padic_affine::literal;
use padic_affine::measure::IntensityMeasure;
use padic_affine::padic::{Ball, Prime, Rational};
use padic_affine::poisson::{self, CylinderFunction, Resolution, SamplingPlan};
use padic_affine::representation::{self as rep, CheckKind, CheckMode, CheckReport, CheckSettings};
use padic_affine::stepfn::StepFunction;
use padic_affine::suite;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn prime(p: u64) -> PyResult<Prime> {
    Prime::new(p).map_err(err)
}

fn mode(name: &str) -> PyResult<CheckMode> {
    match name {
        "exact" => Ok(CheckMode::Exact),
        "monte-carlo" | "mc" => Ok(CheckMode::MonteCarlo),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    }
}

fn settings(seed: u64, samples: usize) -> CheckSettings {
    CheckSettings { seed, samples, ..CheckSettings::default() }
}

/// A compact open subset of Q_p.
#[pyclass(name = "ClopenSet", module = "padic_affine_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyClopenSet {
    inner: ClopenSet,
}

#[pymethods]
impl PyClopenSet {
    #[staticmethod]
    fn parse(text: &str, p: u64) -> PyResult<Self> {
        Ok(Self { inner: literal::parse_set(text, prime(p)?).map_err(err)? })
    }

    #[staticmethod]
    fn ball(center: Rational, radius: i64, p: u64) -> PyResult<Self> {
        Ok(Self { inner: ClopenSet::from_ball(Ball::new(prime(p)?, &center, radius)) })
    }

    #[getter]
    fn p(&self) -> u32 {
        self.inner.prime().get()
    }

    fn measure(&self) -> Rational {
        self.inner.measure()
    }

    fn contains(&self, x: Rational) -> bool {
        self.inner.contains(&x)
    }

    fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn union(&self, other: &Self) -> Self {
        Self { inner: self.inner.union(&other.inner) }
    }

    fn intersect(&self, other: &Self) -> Self {
        Self { inner: self.inner.intersect(&other.inner) }
    }

    fn subtract(&self, other: &Self) -> Self {
        Self { inner: self.inner.subtract(&other.inner) }
    }

    fn is_subset_of(&self, other: &Self) -> bool {
        self.inner.is_subset_of(&other.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("ClopenSet({:?}, p={})", self.inner.to_string(), self.p())
    }
}

/// A locally constant function given by a ball partition and a tail value.
#[pyclass(name = "StepFunction", module = "padic_affine_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyStepFunction {
    inner: StepFunction,
}

#[pymethods]
impl PyStepFunction {
    #[staticmethod]
    fn parse(text: &str, p: u64) -> PyResult<Self> {
        Ok(Self { inner: literal::parse_step(text, prime(p)?).map_err(err)? })
    }

    #[staticmethod]
    fn indicator(set: &PyClopenSet, value: Rational) -> Self {
        Self { inner: StepFunction::indicator(&set.inner, value) }
    }

    #[getter]
    fn p(&self) -> u32 {
        self.inner.prime().get()
    }

    #[getter]
    fn tail(&self) -> Rational {
        self.inner.tail().clone()
    }

    /// `(center, radius_exp, value)` for every piece.
    fn pieces(&self) -> Vec<(Rational, i64, Rational)> {
        self.inner
            .pieces()
            .iter()
            .map(|(b, v)| (b.center().clone(), b.radius_exp(), v.clone()))
            .collect()
    }

    fn __call__(&self, x: Rational) -> Rational {
        self.inner.evaluate(&x).clone()
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.add(&other.inner).map_err(err)? })
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self { inner: self.inner.mul(&other.inner).map_err(err)? })
    }

    fn scale(&self, c: Rational) -> Self {
        Self { inner: self.inner.scale(&c) }
    }

    fn translate(&self, h: Rational) -> Self {
        Self { inner: self.inner.translate(&h) }
    }

    /// Haar integral over `set`, or over all of Q_p when omitted.
    #[pyo3(signature = (set=None))]
    fn integrate(&self, set: Option<&PyClopenSet>) -> PyResult<Rational> {
        match set {
            Some(s) => self.inner.integrate(&s.inner),
            None => self.inner.integrate_total(),
        }
        .map_err(err)
    }

    fn support(&self) -> PyClopenSet {
        PyClopenSet { inner: self.inner.deviation_support() }
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("StepFunction({:?}, p={})", self.inner.to_string(), self.p())
    }
}

/// An element `g = (a, b)` acting by `x -> (x + b(x)) / a(x)`.
#[pyclass(name = "AffineElement", module = "padic_affine_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyAffineElement {
    inner: AffineElement,
}

#[pymethods]
impl PyAffineElement {
    #[staticmethod]
    fn parse(text: &str, p: u64) -> PyResult<Self> {
        Ok(Self { inner: literal::parse_affine(text, prime(p)?).map_err(err)? })
    }

    #[staticmethod]
    fn identity(p: u64) -> PyResult<Self> {
        Ok(Self { inner: AffineElement::identity(prime(p)?) })
    }

    #[staticmethod]
    fn localized_shift(ball: &PyClopenSet, h: Rational) -> PyResult<Self> {
        match ball.inner.balls() {
            [b] => Ok(Self { inner: AffineElement::localized_shift(b, h) }),
            _ => Err(PyValueError::new_err("a single ball is required")),
        }
    }

    #[getter]
    fn p(&self) -> u32 {
        self.inner.prime().get()
    }

    #[getter]
    fn a(&self) -> PyStepFunction {
        PyStepFunction { inner: self.inner.a().clone() }
    }

    #[getter]
    fn b(&self) -> PyStepFunction {
        PyStepFunction { inner: self.inner.b().clone() }
    }

    fn __mul__(&self, right: &Self) -> Self {
        Self { inner: self.inner.multiply(&right.inner) }
    }

    fn inverse(&self) -> Self {
        Self { inner: self.inner.inverse() }
    }

    fn is_identity(&self) -> bool {
        self.inner.is_identity()
    }

    fn act_point(&self, x: Rational) -> Rational {
        self.inner.act_point(&x)
    }

    /// `x -> f(g(x) x)`.
    fn act_function(&self, f: &PyStepFunction) -> PyStepFunction {
        PyStepFunction { inner: self.inner.act_function(&f.inner) }
    }

    fn preimage(&self, set: &PyClopenSet) -> PyClopenSet {
        PyClopenSet { inner: self.inner.preimage_clopen(&set.inner) }
    }

    /// Density of the pushforward of Haar measure.
    fn pushforward_density(&self) -> PyStepFunction {
        let rho = IntensityMeasure::haar(self.inner.prime()).pushforward(&self.inner);
        PyStepFunction { inner: rho.density().clone() }
    }

    fn mass_defect(&self) -> Rational {
        IntensityMeasure::haar(self.inner.prime()).pushforward(&self.inner).mass_defect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("AffineElement({:?}, p={})", self.inner.to_string(), self.p())
    }
}

/// A functional of Poisson configurations with a bounded window.
#[pyclass(name = "CylinderFunction", module = "padic_affine_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyCylinderFunction {
    inner: CylinderFunction,
}

#[pymethods]
impl PyCylinderFunction {
    #[staticmethod]
    fn parse(text: &str, p: u64) -> PyResult<Self> {
        Ok(Self { inner: literal::parse_cylinder(text, prime(p)?).map_err(err)? })
    }

    /// `γ -> exp <f, γ>`.
    #[staticmethod]
    fn exponential(f: &PyStepFunction) -> PyResult<Self> {
        Ok(Self { inner: CylinderFunction::exponential(f.inner.clone()).map_err(err)? })
    }

    fn window(&self) -> PyClopenSet {
        PyClopenSet { inner: self.inner.window().clone() }
    }

    fn __call__(&self, points: Vec<Rational>) -> f64 {
        self.inner.evaluate(&points)
    }

    /// `V_g F`.
    fn transform(&self, g: &PyAffineElement) -> Self {
        Self { inner: self.inner.transform(&g.inner) }
    }

    /// Closed-form expectation under the Poisson measure of `density`
    /// (Haar when omitted).
    #[pyo3(signature = (density=None))]
    fn expect(&self, density: Option<&PyStepFunction>) -> PyResult<f64> {
        let mu = intensity(density, self.inner.prime())?;
        poisson::expect_exact(&self.inner, &mu).map_err(err)
    }

    /// Monte Carlo `(mean, stderr)`.
    #[pyo3(signature = (samples, seed, density=None, depth_margin=poisson::DEFAULT_DEPTH_MARGIN))]
    fn expect_mc(
        &self,
        py: Python<'_>,
        samples: usize,
        seed: u64,
        density: Option<&PyStepFunction>,
        depth_margin: u32,
    ) -> PyResult<(f64, f64)> {
        let mu = intensity(density, self.inner.prime())?;
        let est = py
            .detach(|| poisson::expect_mc(&self.inner, &mu, samples, seed, depth_margin))
            .map_err(err)?;
        Ok((est.mean, est.stderr))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("CylinderFunction({:?}, p={})", self.inner.to_string(), self.inner.prime().get())
    }
}

fn intensity(density: Option<&PyStepFunction>, p: Prime) -> PyResult<IntensityMeasure> {
    match density {
        Some(d) => IntensityMeasure::new(d.inner.clone()).map_err(err),
        None => Ok(IntensityMeasure::haar(p)),
    }
}

/// Outcome of one identity check.
#[pyclass(name = "CheckReport", module = "padic_affine_py", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyCheckReport {
    name: String,
    mode: String,
    kind: String,
    lhs: f64,
    rhs: f64,
    defect: f64,
    passed: bool,
    note: Option<String>,
}

impl From<CheckReport> for PyCheckReport {
    fn from(r: CheckReport) -> Self {
        PyCheckReport {
            name: r.name.clone(),
            mode: match r.mode {
                CheckMode::Exact => "exact",
                CheckMode::MonteCarlo => "monte-carlo",
            }
            .into(),
            kind: match r.kind {
                CheckKind::Test => "test",
                CheckKind::Audit => "audit",
            }
            .into(),
            lhs: r.lhs,
            rhs: r.rhs,
            defect: r.defect,
            passed: r.pass,
            note: r.note,
        }
    }
}

#[pymethods]
impl PyCheckReport {
    #[getter]
    fn is_failure(&self) -> bool {
        self.kind == "test" && !self.passed
    }

    #[getter]
    fn is_finding(&self) -> bool {
        self.kind == "audit" && !self.passed
    }

    fn __repr__(&self) -> String {
        format!(
            "CheckReport(name={:?}, kind={:?}, mode={:?}, lhs={}, rhs={}, defect={}, passed={})",
            self.name,
            self.kind,
            self.mode,
            self.lhs,
            self.rhs,
            self.defect,
            if self.passed { "True" } else { "False" }
        )
    }
}

/// Canonical printed form and type name of any literal.
#[pyfunction]
fn canonical(text: &str, p: u64) -> PyResult<(String, String)> {
    let value = literal::parse(text, prime(p)?).map_err(err)?;
    Ok((value.type_name().to_string(), literal::print(&value)))
}

#[pyfunction]
#[pyo3(signature = (g, f, mode="exact", seed=0, samples=100_000))]
fn check_lemma_v(
    py: Python<'_>,
    g: &PyAffineElement,
    f: &PyCylinderFunction,
    mode: &str,
    seed: u64,
    samples: usize,
) -> PyResult<PyCheckReport> {
    let m = self::mode(mode)?;
    let s = settings(seed, samples);
    py.detach(|| rep::check_lemma_v(&g.inner, &f.inner, m, &s)).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, f, mode="exact", seed=0, samples=100_000))]
fn check_rn_identity(
    py: Python<'_>,
    g: &PyAffineElement,
    f: &PyStepFunction,
    mode: &str,
    seed: u64,
    samples: usize,
) -> PyResult<PyCheckReport> {
    let m = self::mode(mode)?;
    let s = settings(seed, samples);
    py.detach(|| rep::check_rn_identity(&g.inner, &f.inner, m, &s)).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, f, mode="exact", seed=0, samples=100_000))]
fn check_isometry(
    py: Python<'_>,
    g: &PyAffineElement,
    f: &PyStepFunction,
    mode: &str,
    seed: u64,
    samples: usize,
) -> PyResult<PyCheckReport> {
    let m = self::mode(mode)?;
    let s = settings(seed, samples);
    py.detach(|| rep::check_isometry(&g.inner, &f.inner, m, &s)).map(Into::into).map_err(err)
}

/// The two isometry exponents as `{value of 2f: weight}` maps.
#[pyfunction]
fn isometry_exponents(
    g: &PyAffineElement,
    f: &PyStepFunction,
) -> (Vec<(Rational, Rational)>, Vec<(Rational, Rational)>) {
    let (l, r) = rep::isometry_exponents(&g.inner, &f.inner);
    let pairs = |e: &poisson::LaplaceExponent| e.weights().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    (pairs(&l), pairs(&r))
}

#[pyfunction]
fn find_decoupler(l1: &PyClopenSet, l2: &PyClopenSet) -> PyAffineElement {
    PyAffineElement { inner: rep::find_decoupler(&l1.inner, &l2.inner) }
}

#[pyfunction]
fn composition_region(g1: &PyAffineElement, g2: &PyAffineElement, f: &PyStepFunction) -> PyClopenSet {
    PyClopenSet { inner: composition_defect(&g1.inner, &g2.inner, &f.inner) }
}

/// `n` Poisson configurations of `density`, each a list of points.
#[pyfunction]
#[pyo3(signature = (density, n, seed, window=None, depth_margin=poisson::DEFAULT_DEPTH_MARGIN))]
fn sample(
    py: Python<'_>,
    density: &PyStepFunction,
    n: usize,
    seed: u64,
    window: Option<&PyClopenSet>,
    depth_margin: u32,
) -> PyResult<Vec<Vec<Rational>>> {
    let mu = IntensityMeasure::new(density.inner.clone()).map_err(err)?;
    let window = match window {
        Some(w) => w.inner.clone(),
        None => {
            let deviation = mu.density().deviation_support();
            ClopenSet::from_ball(poisson::enclosing_window(mu.prime(), &[&deviation]))
        }
    };
    let outer = poisson::enclosing_window(mu.prime(), &[&window]);
    let objects: Vec<&dyn Resolution> = vec![&mu, &window];
    let depth = poisson::required_depth(&objects, &outer) + depth_margin;
    let plan = SamplingPlan::new(&mu, &window, depth);
    Ok(py.detach(|| poisson::sample_map(&plan, n, seed, |pts| pts.to_vec())))
}

/// Every check of the verification suite, sorted by name.
#[pyfunction]
#[pyo3(signature = (p=3, seed=42, samples=20_000, trials=suite::DEFAULT_TRIALS))]
fn verify_all(py: Python<'_>, p: u64, seed: u64, samples: usize, trials: usize) -> PyResult<Vec<PyCheckReport>> {
    let prime = prime(p)?;
    let s = settings(seed, samples);
    let reports = py.detach(|| suite::verify_all_with(prime, &s, trials));
    Ok(reports.into_iter().map(Into::into).collect())
}

#[pymodule]
fn padic_affine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyClopenSet>()?;
    m.add_class::<PyStepFunction>()?;
    m.add_class::<PyAffineElement>()?;
    m.add_class::<PyCylinderFunction>()?;
    m.add_class::<PyCheckReport>()?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma_v, m)?)?;
    m.add_function(wrap_pyfunction!(check_rn_identity, m)?)?;
    m.add_function(wrap_pyfunction!(check_isometry, m)?)?;
    m.add_function(wrap_pyfunction!(isometry_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(find_decoupler, m)?)?;
    m.add_function(wrap_pyfunction!(composition_region, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
