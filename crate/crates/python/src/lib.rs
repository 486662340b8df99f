use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyComplex, PyDict};

use smartbeam::acceptance;
use smartbeam::control::{close_loop, FeedbackLaw, LawKind};
use smartbeam::materials::{self, CompositeSpec, Knob};
use smartbeam::models::{assemble, DiscreteSystem, ModelKind};
use smartbeam::operators::Grid;
use smartbeam::simulate;
use smartbeam::spectral::{self, resonance};

fn err(e: smartbeam::Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Layer geometry and material constants of the three-layer beam.
#[pyclass(name = "Spec", from_py_object)]
#[derive(Clone)]
pub struct PySpec {
    pub inner: CompositeSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    #[pyo3(signature = (length=None, h=None, rho=None, alpha=None, g2=None, gamma=None, beta=None, mu=None, shear_damping=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        length: Option<f64>,
        h: Option<[f64; 3]>,
        rho: Option<[f64; 3]>,
        alpha: Option<[f64; 3]>,
        g2: Option<f64>,
        gamma: Option<f64>,
        beta: Option<f64>,
        mu: Option<f64>,
        shear_damping: Option<f64>,
    ) -> PyResult<Self> {
        let d = CompositeSpec::default();
        let inner = CompositeSpec {
            length: length.unwrap_or(d.length),
            h: h.unwrap_or(d.h),
            rho: rho.unwrap_or(d.rho),
            alpha: alpha.unwrap_or(d.alpha),
            g2: g2.unwrap_or(d.g2),
            gamma: gamma.unwrap_or(d.gamma),
            beta: beta.unwrap_or(d.beta),
            mu: mu.unwrap_or(d.mu),
            shear_damping: shear_damping.unwrap_or(d.shear_damping),
        };
        inner.validate().map_err(err)?;
        Ok(PySpec { inner })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn h(&self) -> [f64; 3] {
        self.inner.h
    }

    #[getter]
    fn rho(&self) -> [f64; 3] {
        self.inner.rho
    }

    #[getter]
    fn alpha(&self) -> [f64; 3] {
        self.inner.alpha
    }

    #[getter]
    fn g2(&self) -> f64 {
        self.inner.g2
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    /// Copy with one of mu, G2, beta, gamma replaced.
    fn with_knob(&self, knob: &str, value: f64) -> PyResult<Self> {
        let k = Knob::parse(knob).ok_or_else(|| PyValueError::new_err(format!("unknown knob {knob:?}")))?;
        Ok(PySpec { inner: self.inner.with_knob(k, value) })
    }

    /// Derived constants of both reduced models as a name -> value dict.
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in materials::coefficient_rows(&self.inner).map_err(err)? {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// An assembled model, optionally closed by a feedback law.
#[pyclass(name = "System")]
pub struct PySystem {
    pub inner: DiscreteSystem,
}

#[pymethods]
impl PySystem {
    /// `law=None` keeps the loop open; `law="default"` picks the model's law.
    #[new]
    #[pyo3(signature = (model, spec, n, law=None, gains=None))]
    fn new(model: &str, spec: &PySpec, n: usize, law: Option<&str>, gains: Option<Vec<f64>>) -> PyResult<Self> {
        let kind = ModelKind::parse(model).ok_or_else(|| PyValueError::new_err(format!("unknown model {model:?}")))?;
        let grid = Grid::new(spec.inner.length, n).map_err(err)?;
        let mut open = assemble(kind, &spec.inner, &grid).map_err(err)?;
        let Some(law) = law else {
            return Ok(PySystem { inner: open });
        };
        let lk = match law {
            "default" => LawKind::default_for(kind),
            s => LawKind::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown law {s:?}")))?,
        };
        if lk == LawKind::InertialSliding {
            open = open.inertial_sliding_subsystem().map_err(err)?;
        }
        let fl = match gains {
            Some(g) => FeedbackLaw::new(lk, g).map_err(err)?,
            None => FeedbackLaw::unit(lk),
        };
        Ok(PySystem { inner: close_loop(&open, &fl).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.inner.kind.name()
    }

    fn skew_defect(&self) -> f64 {
        self.inner.skew_defect()
    }

    /// (total, kinetic, potential).
    fn energy(&self, x: Vec<f64>) -> PyResult<(f64, f64, f64)> {
        let e = self.inner.energy(&x).map_err(err)?;
        Ok((e.total, e.kinetic, e.potential))
    }

    /// Natural frequencies of the undamped system, ascending.
    fn frequencies(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.modes().map_err(err)?.0)
    }

    /// Eigenvalues of the pencil, sorted by real part descending.
    fn spectrum<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyComplex>>> {
        let sp = spectral::spectrum(&self.inner).map_err(err)?;
        Ok(sp.eigenvalues.iter().map(|l| PyComplex::from_doubles(py, l.re, l.im)).collect())
    }

    fn abscissa(&self) -> PyResult<f64> {
        Ok(spectral::spectrum(&self.inner).map_err(err)?.abscissa())
    }

    /// Uniform random state in [-1, 1]^dim.
    fn random_state(&self, seed: u64) -> Vec<f64> {
        resonance::random_state(self.inner.dim(), seed)
    }

    /// Random combination of the lowest `modes` modes.
    fn smooth_state(&self, modes: usize, seed: u64) -> PyResult<Vec<f64>> {
        resonance::smooth_random_state(&self.inner, modes, seed).map_err(err)
    }

    fn default_dt(&self) -> f64 {
        simulate::default_dt(&self.inner)
    }

    /// Integrates and returns the sampled energy trace plus the final state.
    #[pyo3(signature = (x0, t_end, dt=None, stride=1))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        t_end: f64,
        dt: Option<f64>,
        stride: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let dt = dt.unwrap_or_else(|| simulate::default_dt(&self.inner));
        let (tr, last) = py
            .detach(|| simulate::integrate(&self.inner, &x0, t_end, dt, stride))
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("t", tr.t)?;
        d.set_item("E_total", tr.total)?;
        d.set_item("E_kin", tr.kinetic)?;
        d.set_item("E_pot", tr.potential)?;
        d.set_item("channels", tr.channels)?;
        d.set_item("obs", tr.obs)?;
        d.set_item("final", last)?;
        Ok(d)
    }
}

/// Searches for a tuned knob value at which the quarter-wave pair (n, m)
/// gives an undamped mode; returns the certificate or the infeasibility.
#[pyfunction]
#[pyo3(signature = (spec, n, m, knob="mu", lo=None, hi=None, samples=400))]
fn resonance_search<'py>(
    py: Python<'py>,
    spec: &PySpec,
    n: u32,
    m: u32,
    knob: &str,
    lo: Option<f64>,
    hi: Option<f64>,
    samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let k = Knob::parse(knob).ok_or_else(|| PyValueError::new_err(format!("unknown knob {knob:?}")))?;
    let v = spec.inner.knob(k);
    let opts = resonance::SearchOptions {
        interval: (lo.unwrap_or(v * 1e-8), hi.unwrap_or(v * 1e8)),
        samples,
        log: true,
        check_points: 640,
    };
    let out = resonance::resonance_search(&spec.inner, n, m, k, &opts).map_err(err)?;
    let d = PyDict::new(py);
    match out {
        resonance::ResonanceOutcome::Certified(c) => {
            d.set_item("status", "certified")?;
            for (name, val) in c.rows() {
                d.set_item(name, val)?;
            }
        }
        resonance::ResonanceOutcome::Infeasible(inf) => {
            d.set_item("status", "infeasible")?;
            d.set_item("interval", inf.interval)?;
            d.set_item("min_mismatch", inf.min_mismatch)?;
            d.set_item("at", inf.at)?;
            d.set_item("reason", inf.reason)?;
        }
    }
    Ok(d)
}

/// Runs one acceptance criterion on `spec`; returns (passed, detail).
#[pyfunction]
fn acceptance_criterion(py: Python<'_>, id: u8, spec: &PySpec) -> PyResult<(bool, String)> {
    if !(1..=11).contains(&id) {
        return Err(PyValueError::new_err(format!("criteria are numbered 1 to 11, got {id}")));
    }
    let r = py.detach(|| acceptance::run(id, &spec.inner));
    Ok((r.passed, r.detail))
}

/// The four-row closed-loop stability summary as (model, feedback, verdict).
#[pyfunction]
fn stability_table(py: Python<'_>, spec: &PySpec) -> PyResult<Vec<(String, String, String)>> {
    let rows = py.detach(|| acceptance::stability_table(&spec.inner)).map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.model.to_string(), r.feedback.to_string(), r.verdict)).collect())
}

#[pymodule]
fn smartbeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(resonance_search, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(stability_table, m)?)?;
    m.add("MODELS", ModelKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_and_validation() {
        let s = PySpec::new(None, None, None, None, None, None, None, None, None).unwrap();
        assert_eq!(s.inner, CompositeSpec::default());
        assert!(PySpec::new(None, Some([0.01, -1.0, 0.001]), None, None, None, None, None, None, None).is_err());
        assert_eq!(s.with_knob("mu", 2e-5).unwrap().mu(), 2e-5);
    }

    #[test]
    fn system_open_and_closed() {
        let s = PySpec::new(None, None, None, None, None, None, None, None, None).unwrap();
        let open = PySystem::new("rn-static", &s, 8, None, None).unwrap();
        assert!(open.skew_defect() < 1e-12);
        let closed = PySystem::new("rn-static", &s, 8, Some("default"), Some(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(closed.dim(), open.dim());
        assert!(closed.abscissa().unwrap() < 0.0);
        assert!(PySystem::new("rn-static", &s, 8, Some("mm-dynamic"), None).is_err());
    }
}
