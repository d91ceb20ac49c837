//! Python bindings: the quadratic-map family, entropy estimates, the
//! normal-form strip, PCF scanning and bone tracing.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use rqmap::bones::{self, BoneKind, BoundarySide, TraceOptions, VWindow};
use rqmap::entropy::{self, EntropyEstimate, LapOptions};
use rqmap::family::{CriticalValuePair, NormalFormParams, QuadraticMap as CoreMap, RegionTag};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn lap_options(n_max: usize, lap_cap: u64, tol: f64) -> LapOptions {
    LapOptions {
        n_max,
        lap_cap,
        tol,
        ..LapOptions::default()
    }
}

fn estimate_dict<'py>(py: Python<'py>, est: &EntropyEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", est.value)?;
    d.set_item("upper_bound", est.upper_bound)?;
    d.set_item("method", est.method.as_str())?;
    d.set_item("depth", est.depth)?;
    d.set_item("tolerance", est.tolerance)?;
    d.set_item("converged", est.converged)?;
    Ok(d)
}

/// A real quadratic rational map a(z + 1/z) + b with critical points -1, +1.
#[pyclass(name = "QuadraticMap")]
struct PyQuadraticMap {
    inner: CoreMap,
}

#[pymethods]
impl PyQuadraticMap {
    #[new]
    fn new(a: f64, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreMap::new(a, b).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_critical_values(v1: f64, v2: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreMap::from_critical_values(CriticalValuePair::new(v1, v2))
                .map_err(value_err)?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    fn critical_values(&self) -> (f64, f64) {
        let v = self.inner.critical_values();
        (v.v1, v.v2)
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    /// Moduli coordinates (sigma1, sigma2).
    fn sigma(&self) -> (f64, f64) {
        let s = self.inner.sigma();
        (s.sigma1, s.sigma2)
    }

    /// One of "monotonic", "unimodal", "bimodal_plus_minus_plus",
    /// "bimodal_minus_plus_minus".
    fn classify(&self) -> PyResult<String> {
        let class = self.inner.classify().map_err(value_err)?;
        Ok(match class.tag {
            RegionTag::Monotonic => "monotonic",
            RegionTag::Unimodal => "unimodal",
            RegionTag::BimodalPlusMinusPlus => "bimodal_plus_minus_plus",
            RegionTag::BimodalMinusPlusMinus => "bimodal_minus_plus_minus",
        }
        .to_string())
    }

    /// The essential critical point (-1.0 or +1.0) for unimodal maps.
    fn essential_critical_point(&self) -> PyResult<Option<f64>> {
        let class = self.inner.classify().map_err(value_err)?;
        Ok(class.essential.map(|c| c.value()))
    }

    /// Real entropy of the restriction to the image interval.
    #[pyo3(signature = (n_max = 40, lap_cap = 1_000_000, tol = 1e-3))]
    fn real_entropy<'py>(
        &self,
        py: Python<'py>,
        n_max: usize,
        lap_cap: u64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let est = entropy::real_entropy(&self.inner, &lap_options(n_max, lap_cap, tol))
            .map_err(value_err)?;
        estimate_dict(py, &est)
    }

    fn __repr__(&self) -> String {
        format!("QuadraticMap(a={}, b={})", self.inner.a(), self.inner.b())
    }
}

/// True when (mu, t) lies in the admissible unimodal strip.
#[pyfunction]
fn normal_form_admissible(mu: f64, t: f64) -> bool {
    NormalFormParams::admissible(mu, t)
}

/// Moduli coordinates (sigma1, sigma2) of the normal-form map.
#[pyfunction]
fn normal_form_sigma(mu: f64, t: f64) -> PyResult<(f64, f64)> {
    let sys = NormalFormParams::new(mu, t).map_err(value_err)?.to_system();
    Ok((sys.sigma.sigma1, sys.sigma.sigma2))
}

/// Lap-counting entropy of the normal-form interval map.
#[pyfunction]
#[pyo3(signature = (mu, t, n_max = 100, lap_cap = 100_000, tol = 1e-3))]
fn normal_form_entropy<'py>(
    py: Python<'py>,
    mu: f64,
    t: f64,
    n_max: usize,
    lap_cap: u64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = NormalFormParams::new(mu, t).map_err(value_err)?.to_system();
    let est = entropy::entropy_lap(&sys.interval_model(), &lap_options(n_max, lap_cap, tol))
        .map_err(value_err)?;
    estimate_dict(py, &est)
}

/// Band index 0..6 of an entropy value under the standard partition.
#[pyfunction]
fn band_classify(h: f64) -> PyResult<u8> {
    rqmap::atlas::band_classify(h).map_err(value_err)
}

/// Scans a critical-value window for postcritically finite parameters.
#[pyfunction]
#[pyo3(signature = (v1_min, v1_max, v2_min, v2_max, n_max = 4, m_max = 6, nx = 240, ny = 160))]
#[allow(clippy::too_many_arguments)]
fn scan_pcf<'py>(
    py: Python<'py>,
    v1_min: f64,
    v1_max: f64,
    v2_min: f64,
    v2_max: f64,
    n_max: usize,
    m_max: usize,
    nx: usize,
    ny: usize,
) -> PyResult<Bound<'py, PyList>> {
    let window = VWindow::new(v1_min, v1_max, v2_min, v2_max);
    let points = bones::scan_pcf(&window, n_max, m_max, (nx, ny));
    let list = PyList::empty(py);
    for p in points {
        let d = PyDict::new(py);
        d.set_item("n", p.n)?;
        d.set_item("m", p.m)?;
        d.set_item("v1", p.v.v1)?;
        d.set_item("v2", p.v.v2)?;
        d.set_item("quotient", p.quotient)?;
        d.set_item("derivative_sign", p.derivative_sign)?;
        list.append(d)?;
    }
    Ok(list)
}

/// Traces the order-n bone through a seed on the curve.
#[pyfunction]
#[pyo3(signature = (v1, v2, n, v1_min = 0.5, v1_max = 12.0, v2_min = -1.2, v2_max = 1.2))]
#[allow(clippy::too_many_arguments)]
fn trace_bone<'py>(
    py: Python<'py>,
    v1: f64,
    v2: f64,
    n: usize,
    v1_min: f64,
    v1_max: f64,
    v2_min: f64,
    v2_max: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let window = VWindow::new(v1_min, v1_max, v2_min, v2_max);
    let bone = bones::trace_bone(
        CriticalValuePair::new(v1, v2),
        n,
        &window,
        &TraceOptions::default(),
    )
    .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("n", bone.n)?;
    d.set_item(
        "kind",
        match bone.kind {
            BoneKind::Arc => "arc",
            BoneKind::Loop => "loop",
            BoneKind::Truncated => "truncated",
        },
    )?;
    d.set_item("arclength", bone.arclength)?;
    let side = |s: &Option<BoundarySide>| match s {
        Some(BoundarySide::SigmaTwo) => "sigma_two",
        Some(BoundarySide::SigmaMinusSix) => "sigma_minus_six",
        Some(BoundarySide::WindowEdge) => "window_edge",
        None => "none",
    };
    d.set_item(
        "endpoints",
        (side(&bone.endpoint_info[0]), side(&bone.endpoint_info[1])),
    )?;
    let points = PyList::empty(py);
    for p in &bone.points {
        points.append((p.v1, p.v2))?;
    }
    d.set_item("points", points)?;
    Ok(d)
}

#[pymodule]
fn rqmap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuadraticMap>()?;
    m.add_function(wrap_pyfunction!(normal_form_admissible, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(band_classify, m)?)?;
    m.add_function(wrap_pyfunction!(scan_pcf, m)?)?;
    m.add_function(wrap_pyfunction!(trace_bone, m)?)?;
    Ok(())
}
