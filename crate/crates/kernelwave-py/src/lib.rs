//! Python bindings. Kernel, transition and backend names are the same
//! kebab-case strings the command line accepts.

use kernelwave::expansion::{self, Point, Transition};
use kernelwave::kernels::{self, Backend, KernelId};
use kernelwave::phase::{self, PhaseKind};
use kernelwave::quadrature;
use kernelwave::verify::{self, ResidualMode};
use kernelwave::{Error, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Usage(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn point(p: (f64, f64, f64, f64)) -> Point {
    Point::new(p.0, p.1, p.2, p.3)
}

/// Quadrature tolerances and geometry knobs.
#[pyclass(get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct QuadOptions {
    rel_tol: f64,
    abs_tol: f64,
    nodes_per_panel: usize,
    max_refine_depth: u32,
    ray_truncation_budget: f64,
    duffy_radius: f64,
    direct_offset: f64,
}

impl From<quadrature::QuadOptions> for QuadOptions {
    fn from(o: quadrature::QuadOptions) -> Self {
        Self {
            rel_tol: o.rel_tol,
            abs_tol: o.abs_tol,
            nodes_per_panel: o.nodes_per_panel,
            max_refine_depth: o.max_refine_depth,
            ray_truncation_budget: o.ray_truncation_budget,
            duffy_radius: o.duffy_radius,
            direct_offset: o.direct_offset,
        }
    }
}

impl QuadOptions {
    fn inner(&self) -> quadrature::QuadOptions {
        quadrature::QuadOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            nodes_per_panel: self.nodes_per_panel,
            max_refine_depth: self.max_refine_depth,
            ray_truncation_budget: self.ray_truncation_budget,
            duffy_radius: self.duffy_radius,
            direct_offset: self.direct_offset,
        }
    }
}

fn opts_or_default(o: Option<PyRef<'_, QuadOptions>>) -> quadrature::QuadOptions {
    o.map(|o| o.inner()).unwrap_or_default()
}

#[pymethods]
impl QuadOptions {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut o = Self::from(quadrature::QuadOptions::default());
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "rel_tol" => o.rel_tol = v.extract()?,
                    "abs_tol" => o.abs_tol = v.extract()?,
                    "nodes_per_panel" => o.nodes_per_panel = v.extract()?,
                    "max_refine_depth" => o.max_refine_depth = v.extract()?,
                    "ray_truncation_budget" => o.ray_truncation_budget = v.extract()?,
                    "duffy_radius" => o.duffy_radius = v.extract()?,
                    "direct_offset" => o.direct_offset = v.extract()?,
                    other => return Err(PyValueError::new_err(format!("unknown option '{other}'"))),
                }
            }
        }
        o.inner().validate().map_err(py_err)?;
        Ok(o)
    }

    fn __repr__(&self) -> String {
        format!(
            "QuadOptions(rel_tol={}, abs_tol={}, nodes_per_panel={}, max_refine_depth={}, ray_truncation_budget={}, duffy_radius={}, direct_offset={})",
            self.rel_tol, self.abs_tol, self.nodes_per_panel, self.max_refine_depth, self.ray_truncation_budget, self.duffy_radius, self.direct_offset
        )
    }
}

/// A kernel value with its accuracy diagnostics.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct KernelValue {
    value: C64,
    imag_residual: f64,
    error_estimate: f64,
    backend_used: String,
    converged: bool,
}

impl From<kernels::KernelValue> for KernelValue {
    fn from(v: kernels::KernelValue) -> Self {
        Self {
            value: v.value,
            imag_residual: v.imag_residual,
            error_estimate: v.error_estimate,
            backend_used: v.backend_used.name().to_string(),
            converged: v.converged,
        }
    }
}

#[pymethods]
impl KernelValue {
    fn __float__(&self) -> f64 {
        self.value.re
    }

    fn __repr__(&self) -> String {
        format!(
            "KernelValue(value={}, error_estimate={:e}, backend_used='{}', converged={})",
            self.value, self.error_estimate, self.backend_used, self.converged
        )
    }
}

/// Evaluate one kernel at `(tau1, tau2, u, v)`.
#[pyfunction]
#[pyo3(signature = (kernel, tau1, tau2, u, v, a=None, backend="direct", opts=None))]
#[allow(clippy::too_many_arguments)]
fn eval_kernel(
    py: Python<'_>,
    kernel: &str,
    tau1: f64,
    tau2: f64,
    u: f64,
    v: f64,
    a: Option<f64>,
    backend: &str,
    opts: Option<PyRef<'_, QuadOptions>>,
) -> PyResult<KernelValue> {
    let q = kernels::KernelQuery { a_param: a, ..kernels::KernelQuery::new(parse::<KernelId>(kernel)?, tau1, tau2, u, v) }
        .with_backend(parse::<Backend>(backend)?)
        .with_opts(opts_or_default(opts));
    py.detach(|| kernels::eval_kernel(&q)).map(Into::into).map_err(py_err)
}

/// The rescaled kernel on the left of the large-a expansion.
#[pyfunction]
#[pyo3(signature = (transition, a, point, backend="saddle", opts=None))]
fn rescaled_lhs(
    py: Python<'_>,
    transition: &str,
    a: f64,
    point: (f64, f64, f64, f64),
    backend: &str,
    opts: Option<PyRef<'_, QuadOptions>>,
) -> PyResult<KernelValue> {
    let (tr, b, o) = (parse::<Transition>(transition)?, parse::<Backend>(backend)?, opts_or_default(opts));
    let p = self::point(point);
    py.detach(|| verify::rescaled_lhs(tr, p, a, b, &o)).map(Into::into).map_err(py_err)
}

/// Limit kernel plus the first `n` correction terms.
#[pyfunction]
fn expansion_partial_sum(transition: &str, n: usize, point: (f64, f64, f64, f64), a: f64) -> PyResult<f64> {
    expansion::expansion_partial_sum(parse(transition)?, n, self::point(point), a).map_err(py_err)
}

/// The closed-form first correction.
#[pyfunction]
fn fluc(transition: &str, point: (f64, f64, f64, f64), a: f64) -> PyResult<f64> {
    expansion::fluc(parse(transition)?, self::point(point), a).map_err(py_err)
}

#[pyfunction]
fn gauss_moment_b(k: usize, l: usize) -> C64 {
    expansion::gauss_moment_b(k, l)
}

#[pyfunction]
fn gauss_moment_c(k: usize) -> f64 {
    expansion::gauss_moment_c(k)
}

/// Amplitude coefficient matrices, `b[k][l]` multiplying `x^k y^l`.
#[pyclass(frozen, get_all)]
struct ExpansionCoefficients {
    transition: String,
    point: (f64, f64, f64, f64),
    order: usize,
    b: Vec<Vec<C64>>,
    c: Vec<Vec<C64>>,
}

#[pymethods]
impl ExpansionCoefficients {
    fn to_json(&self) -> PyResult<String> {
        let dump = expansion::CoefficientDump {
            transition: parse(&self.transition)?,
            point: self::point(self.point),
            order: self.order,
            b: self.b.clone(),
            c: self.c.clone(),
        };
        serde_json::to_string(&dump).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pyfunction]
#[pyo3(signature = (transition, point=(0.0, 0.0, 0.0, 0.0), order=expansion::DEFAULT_ORDER))]
fn build_amplitudes(transition: &str, point: (f64, f64, f64, f64), order: usize) -> PyResult<ExpansionCoefficients> {
    let e = expansion::build_amplitudes(parse(transition)?, self::point(point), order).map_err(py_err)?;
    let d = expansion::CoefficientDump::from(&e);
    Ok(ExpansionCoefficients { transition: d.transition.name().into(), point, order: d.order, b: d.b, c: d.c })
}

/// Residuals `|lhs - partial sum|` over `a_values`, one row per truncation.
#[pyclass(frozen, get_all)]
struct ResidualTable {
    transition: String,
    point: (f64, f64, f64, f64),
    a_values: Vec<f64>,
    residuals: Vec<Vec<f64>>,
    noise: Vec<f64>,
    slopes: Vec<f64>,
    slope_ci: Vec<f64>,
    envelope: bool,
    csv: String,
}

#[pyfunction]
#[pyo3(signature = (transition, point, a_values=None, n_max=None, backend="saddle", mode="auto", opts=None))]
#[allow(clippy::too_many_arguments)]
fn residual_study(
    py: Python<'_>,
    transition: &str,
    point: (f64, f64, f64, f64),
    a_values: Option<Vec<f64>>,
    n_max: Option<usize>,
    backend: &str,
    mode: &str,
    opts: Option<PyRef<'_, QuadOptions>>,
) -> PyResult<ResidualTable> {
    let tr: Transition = parse(transition)?;
    let mode = match mode {
        "plain" => ResidualMode::Plain,
        "envelope" => ResidualMode::Envelope,
        "auto" => ResidualMode::Auto,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let a = a_values.unwrap_or_else(|| verify::DEFAULT_A_VALUES.to_vec());
    let n_max = n_max.unwrap_or_else(|| verify::default_windows(tr).iter().map(|w| w.n).max().unwrap_or(0));
    let (b, o, p) = (parse::<Backend>(backend)?, opts_or_default(opts), self::point(point));
    let t = py.detach(|| verify::residual_study(tr, p, &a, n_max, b, &o, mode)).map_err(py_err)?;
    let csv = verify::residual_csv(std::slice::from_ref(&t));
    Ok(ResidualTable {
        transition: tr.name().into(),
        point,
        a_values: t.a_values,
        residuals: t.residuals,
        noise: t.noise,
        slopes: t.slopes,
        slope_ci: t.slope_ci,
        envelope: t.envelope,
        csv,
    })
}

/// Least-squares slope of `ln y` against `ln x` with its standard error.
#[pyfunction]
fn fit_loglog_slope(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    verify::fit_loglog_slope(&xs, &ys).map_err(py_err)
}

/// Points of `Im f = Im f(saddle)` for the `airy` or `pearcey` phase.
#[pyfunction]
#[pyo3(signature = (phase, saddle_index, half_width=3.0, resolution=0.02))]
fn level_curve(phase: &str, saddle_index: usize, half_width: f64, resolution: f64) -> PyResult<Vec<(f64, f64)>> {
    let kind = match phase {
        "airy" => PhaseKind::AiryCubic,
        "pearcey" => PhaseKind::PearceyQuartic,
        other => return Err(PyValueError::new_err(format!("unknown phase '{other}'"))),
    };
    let p = phase::make_phase(kind);
    let level = *p
        .levels
        .get(saddle_index)
        .ok_or_else(|| PyValueError::new_err(format!("saddle index {saddle_index} out of range")))?;
    let pts = phase::export_level_curve(&p, level, phase::Window::square(half_width), resolution).map_err(py_err)?;
    Ok(pts.into_iter().map(|z| (z.re, z.im)).collect())
}

#[pymodule]
fn pykernelwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<QuadOptions>()?;
    m.add_class::<KernelValue>()?;
    m.add_class::<ExpansionCoefficients>()?;
    m.add_class::<ResidualTable>()?;
    m.add_function(wrap_pyfunction!(eval_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(rescaled_lhs, m)?)?;
    m.add_function(wrap_pyfunction!(expansion_partial_sum, m)?)?;
    m.add_function(wrap_pyfunction!(fluc, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_moment_b, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_moment_c, m)?)?;
    m.add_function(wrap_pyfunction!(build_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(residual_study, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(level_curve, m)?)?;
    m.add("KERNELS", KernelId::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
