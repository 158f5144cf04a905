//! Python bindings for the billiards crate.

use billiards::cli::export;
use billiards::conformal::{self, Pairing};
use billiards::dynamics::Tolerances;
use billiards::potentials::{self, LagrangeParams};
use billiards::scenario;
use billiards::spaces::{self, Curvature, SpaceSpec};
use billiards::verify::{self, Suite};
use billiards::Error;
use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) | Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn tolerances(tol: Option<f64>) -> Tolerances {
    tol.map_or_else(Tolerances::from_env, Tolerances::uniform)
}

/// A geometry: `"plane"`, `"sphere"` or `"hyperboloid"` with center
/// half-separation `a`. A plane takes the curvature of its partner.
#[pyclass(name = "Space", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpace(SpaceSpec);

#[pymethods]
impl PySpace {
    #[new]
    #[pyo3(signature = (kind, a, partner = "sphere"))]
    fn new(kind: &str, a: f64, partner: &str) -> PyResult<Self> {
        let spec = match kind {
            "sphere" => SpaceSpec::sphere(a),
            "hyperboloid" => SpaceSpec::hyperboloid(a),
            "plane" => {
                let partner = match partner {
                    "sphere" => Curvature::Positive,
                    "hyperboloid" => Curvature::Negative,
                    other => return Err(PyValueError::new_err(format!("unknown partner '{other}'"))),
                };
                SpaceSpec::plane(partner, a)
            }
            other => return Err(PyValueError::new_err(format!("unknown space '{other}'"))),
        };
        spec.map(PySpace).map_err(py_err)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }

    #[getter]
    fn sign(&self) -> f64 {
        self.0.sign()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }

    #[getter]
    fn is_curved(&self) -> bool {
        self.0.is_curved()
    }

    fn partner(&self) -> PySpace {
        PySpace(self.0.partner())
    }

    /// Central lift of a gnomonic chart point onto the curved surface.
    fn lift(&self, p: (f64, f64)) -> PyResult<(f64, f64, f64)> {
        let target = if self.0.is_curved() { self.0 } else { self.0.partner() };
        let q = spaces::central_lift_up(&Vector2::new(p.0, p.1), &target).map_err(py_err)?;
        Ok((q.x, q.y, q.z))
    }

    /// Central projection of a surface point to the gnomonic chart.
    fn project(&self, q: (f64, f64, f64)) -> PyResult<(f64, f64)> {
        let target = if self.0.is_curved() { self.0 } else { self.0.partner() };
        let p = spaces::central_project_down(&Vector3::new(q.0, q.1, q.2), &target).map_err(py_err)?;
        Ok((p.x, p.y))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("spaces serialize")
    }

    fn __repr__(&self) -> String {
        format!("Space({})", self.to_json())
    }
}

/// Kepler masses `m1`, `m2` and Hooke strength `f`.
#[pyclass(name = "Params", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams(LagrangeParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (m1 = 0.0, m2 = 0.0, f = 0.0))]
    fn new(m1: f64, m2: f64, f: f64) -> PyResult<Self> {
        let p = LagrangeParams::new(m1, m2, f);
        p.validate().map_err(py_err)?;
        Ok(PyParams(p))
    }

    #[getter]
    fn m1(&self) -> f64 {
        self.0.m1
    }

    #[getter]
    fn m2(&self) -> f64 {
        self.0.m2
    }

    #[getter]
    fn f(&self) -> f64 {
        self.0.f
    }

    /// Parameters of the partner system in the partner geometry of `space`.
    fn partner(&self, space: &PySpace) -> PyResult<PyParams> {
        self.0.partner(&space.0).map(PyParams).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Params(m1={}, m2={}, f={})", self.0.m1, self.0.m2, self.0.f)
    }
}

/// Native and partner energy of a chart state `(p, v)`; curved states are
/// lifted from the gnomonic chart first.
#[pyfunction]
fn energy_pair(space: &PySpace, params: &PyParams, p: (f64, f64), v: (f64, f64)) -> PyResult<(f64, f64)> {
    let (p, v) = (Vector2::new(p.0, p.1), Vector2::new(v.0, v.1));
    let e = if space.0.is_curved() {
        let (q, w) = potentials::lift_state(&p, &v, &space.0).map_err(py_err)?;
        potentials::energy_pair_curved(&q, &w, &params.0, &space.0)
    } else {
        potentials::energy_pair_plane(&p, &v, &params.0, &space.0)
    }
    .map_err(py_err)?;
    Ok((e.e_native, e.e_partner))
}

#[pyfunction]
fn presets() -> Vec<String> {
    scenario::preset_names()
}

#[pyfunction]
fn preset_json(name: &str) -> PyResult<String> {
    scenario::preset(name)
        .map(|s| serde_json::to_string_pretty(&s).expect("scenarios serialize"))
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset '{name}'")))
}

/// Run a scenario given as JSON. Returns the report together with the
/// trajectory and event rows of billiard scenarios.
#[pyfunction]
#[pyo3(signature = (config, tol = None))]
fn run_scenario<'py>(py: Python<'py>, config: &str, tol: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let scn: scenario::Scenario = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let tol = tolerances(tol);
    let outcome = py.detach(|| scenario::run_scenario(&scn, &tol)).map_err(py_err)?;
    let result = pyo3::types::PyDict::new(py);
    result.set_item("report", from_json(py, &outcome.report)?)?;
    if let Some(rec) = &outcome.record {
        result.set_item("trajectory", export::trajectory_rows(rec).map_err(py_err)?)?;
        result.set_item("events", from_json(py, &rec.events)?)?;
        result.set_item("termination", from_json(py, &rec.termination)?)?;
    }
    if !outcome.orbits.is_empty() {
        result.set_item("orbits", from_json(py, &outcome.orbits)?)?;
    }
    if !outcome.images.is_empty() {
        result.set_item("images", from_json(py, &outcome.images)?)?;
    }
    Ok(result.into_any())
}

/// Run the `"projective"`, `"conformal"` or `"all"` verification suite.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = verify::DEFAULT_SEED, tol = None))]
fn run_verify<'py>(py: Python<'py>, suite: &str, seed: u64, tol: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let suite = match suite {
        "projective" => Suite::Projective,
        "conformal" => Suite::Conformal,
        "all" => Suite::All,
        other => return Err(PyValueError::new_err(format!("unknown suite '{other}'"))),
    };
    let tol = tolerances(tol);
    let results = py.detach(|| verify::run_suite(suite, seed, &tol));
    from_json(py, &results)
}

/// `(z, w) ↦ (z², w/(2z̄))`.
#[pyfunction]
fn square_map(z: Complex64, w: Complex64) -> PyResult<(Complex64, Complex64)> {
    conformal::square_map(z, w).map_err(py_err)
}

#[pyfunction]
fn energy_level_relation(f: f64, mhat: f64, sign: f64) -> f64 {
    conformal::energy_level_relation(f, mhat, sign)
}

/// Compare a mapped Hooke orbit with its partner orbit. `pairing` is one of
/// `"spherical_hooke_kepler"`, `"hyperbolic_hooke_kepler"` or
/// `"spherical_hyperbolic_hooke"`.
#[pyfunction]
#[pyo3(signature = (pairing, f, z0, w0, t_span = None, tol = None))]
fn orbit_correspondence<'py>(
    py: Python<'py>,
    pairing: &str,
    f: f64,
    z0: Complex64,
    w0: Complex64,
    t_span: Option<f64>,
    tol: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let pairing: Pairing =
        serde_json::from_value(serde_json::Value::String(pairing.into())).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let tol = tolerances(tol);
    let result = py
        .detach(|| conformal::verify_orbit_correspondence(pairing, f, z0, w0, t_span, &tol))
        .map_err(py_err)?;
    from_json(py, &result)
}

/// Square-map image of one focused confocal conic with parameters `a`, `B`.
#[pyfunction]
#[pyo3(signature = (a, b, samples = 400))]
fn confocal_image_check<'py>(py: Python<'py>, a: f64, b: f64, samples: usize) -> PyResult<Bound<'py, PyAny>> {
    let report = conformal::confocal_image_check(a, b, samples).map_err(py_err)?;
    from_json(py, &report)
}

#[pymodule]
#[pyo3(name = "billiards")]
fn billiards_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(energy_pair, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(square_map, m)?)?;
    m.add_function(wrap_pyfunction!(energy_level_relation, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_correspondence, m)?)?;
    m.add_function(wrap_pyfunction!(confocal_image_check, m)?)?;
    m.add("DEFAULT_SEED", verify::DEFAULT_SEED)?;
    Ok(())
}
