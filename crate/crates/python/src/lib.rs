//! Python bindings: rate surfaces, the Box-Cox transform, decomposition,
//! forecasting, rolling-origin evaluation and lambda selection. Matrices
//! cross the boundary as lists of rows.

use std::fs::File;
use std::io::BufReader;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fertcast::arima::{self, ArimaFit};
use fertcast::decomposition::ComponentRule;
use fertcast::evaluation::{self, RollingOriginOptions};
use fertcast::forecast::ForecastOptions;
use fertcast::lambda_opt::{Criterion, Method, SelectionOptions};
use fertcast::simulate::SimulationConfig;
use fertcast::{AgeRateSurface, BoxCoxLambda, Error, LoadOptions, SampleSplit};

fn to_py(e: Error) -> PyErr {
    let message = e.to_string();
    match e.root() {
        Error::Io { .. } => PyIOError::new_err(message),
        Error::Numerical(_) => PyArithmeticError::new_err(message),
        _ => PyValueError::new_err(message),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn lambda(value: f64) -> PyResult<BoxCoxLambda> {
    BoxCoxLambda::new(value).map_err(to_py)
}

fn rule(components: Option<usize>) -> ComponentRule {
    components.map_or_else(ComponentRule::default, ComponentRule::Fixed)
}

/// Age-by-year surface of positive rates (years are rows).
#[pyclass(name = "RateSurface", module = "pyfertcast", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRateSurface {
    inner: AgeRateSurface,
}

#[pymethods]
impl PyRateSurface {
    #[new]
    fn new(first_year: i32, first_age: i32, rates: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = AgeRateSurface::new(first_year, first_age, from_rows(&rates)?).map_err(to_py)?;
        Ok(PyRateSurface { inner })
    }

    /// Load a long-format `year,age,rate` CSV.
    #[staticmethod]
    #[pyo3(signature = (path, floor=None))]
    fn from_csv(path: &str, floor: Option<f64>) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let options = floor.map_or_else(LoadOptions::default, LoadOptions::with_floor);
        let inner = fertcast::load_rates(BufReader::new(file), &options).map_err(to_py)?;
        Ok(PyRateSurface { inner })
    }

    #[getter]
    fn first_year(&self) -> i32 {
        self.inner.first_year()
    }

    #[getter]
    fn last_year(&self) -> i32 {
        self.inner.last_year()
    }

    #[getter]
    fn first_age(&self) -> i32 {
        self.inner.first_age()
    }

    #[getter]
    fn n_years(&self) -> usize {
        self.inner.n_years()
    }

    #[getter]
    fn n_ages(&self) -> usize {
        self.inner.n_ages()
    }

    fn years(&self) -> Vec<i32> {
        self.inner.years()
    }

    fn ages(&self) -> Vec<i32> {
        self.inner.ages()
    }

    fn rates(&self) -> Vec<Vec<f64>> {
        rows(self.inner.rates())
    }

    fn years_through(&self, year: i32) -> PyResult<Self> {
        Ok(PyRateSurface {
            inner: self.inner.years_through(year).map_err(to_py)?,
        })
    }

    /// Training / validation / test end years for a test fraction.
    #[pyo3(signature = (test_fraction=0.2))]
    fn split<'py>(&self, py: Python<'py>, test_fraction: f64) -> PyResult<Bound<'py, PyDict>> {
        let s = fertcast::split_by_fraction(&self.inner, test_fraction).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("training_end_year", s.training_end_year)?;
        d.set_item("validation_end_year", s.validation_end_year)?;
        d.set_item("test_end_year", s.test_end_year)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "RateSurface(years={}..={}, ages={}..={})",
            self.inner.first_year(),
            self.inner.last_year(),
            self.inner.first_age(),
            self.inner.first_age() + self.inner.n_ages() as i32 - 1
        )
    }
}

#[pyfunction]
fn box_cox(f: f64, lam: f64) -> PyResult<f64> {
    fertcast::box_cox(f, lambda(lam)?).map_err(to_py)
}

#[pyfunction]
fn inv_box_cox(z: f64, lam: f64) -> PyResult<f64> {
    fertcast::inv_box_cox(z, lambda(lam)?).map_err(to_py)
}

#[pyfunction]
fn interval_score(lower: f64, upper: f64, observed: f64, alpha: f64) -> PyResult<f64> {
    evaluation::interval_score(lower, upper, observed, alpha).map_err(to_py)
}

#[pyfunction]
fn mafe(actual: Vec<Vec<f64>>, predicted: Vec<Vec<f64>>) -> PyResult<f64> {
    evaluation::mafe(&from_rows(&actual)?, &from_rows(&predicted)?).map_err(to_py)
}

/// Mean profile, components (ages x K), scores (years x K) and singular
/// values of the transformed surface.
#[pyfunction]
#[pyo3(signature = (surface, lam, components=None))]
fn decompose<'py>(py: Python<'py>, surface: &PyRateSurface, lam: f64, components: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let z = fertcast::transform::transform_surface(&surface.inner, lambda(lam)?).map_err(to_py)?;
    let dec = fertcast::PcaDecomposition::fit(&z, rule(components)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k", dec.k())?;
    d.set_item("mean", dec.mean.iter().copied().collect::<Vec<_>>())?;
    d.set_item("components", rows(&dec.components))?;
    d.set_item("scores", rows(&dec.scores))?;
    d.set_item("singular_values", dec.singular_values.iter().copied().collect::<Vec<_>>())?;
    d.set_item("residual_variance", dec.residual_variance.iter().copied().collect::<Vec<_>>())?;
    Ok(d)
}

/// Fit on every year of `surface` (or through `fit_end_year`) and forecast
/// `horizon` years ahead. Rate matrices are horizon x ages.
#[pyfunction]
#[pyo3(signature = (surface, lam, horizon, alpha=0.2, components=None, fit_end_year=None))]
fn forecast<'py>(
    py: Python<'py>,
    surface: &PyRateSurface,
    lam: f64,
    horizon: usize,
    alpha: f64,
    components: Option<usize>,
    fit_end_year: Option<i32>,
) -> PyResult<Bound<'py, PyDict>> {
    let fitted = match fit_end_year {
        Some(y) => surface.inner.years_through(y).map_err(to_py)?,
        None => surface.inner.clone(),
    };
    let options = ForecastOptions {
        lambda: lambda(lam)?,
        horizon,
        alpha,
        components: rule(components),
    };
    let run = py.detach(|| fertcast::forecast_surface(&fitted, &options)).map_err(to_py)?;
    let r = &run.rates;
    let d = PyDict::new(py);
    d.set_item("first_year", r.first_year)?;
    d.set_item("first_age", r.first_age)?;
    d.set_item("k", run.decomposition.k())?;
    d.set_item("point", rows(&r.rate_point))?;
    d.set_item("lower", rows(&r.rate_lower))?;
    d.set_item("upper", rows(&r.rate_upper))?;
    d.set_item("z_point", rows(&r.z_point))?;
    d.set_item("z_variance", rows(&r.z_variance))?;
    let clamped: Vec<Vec<bool>> = r.clamped.row_iter().map(|row| row.iter().copied().collect()).collect();
    d.set_item("clamped", clamped)?;
    d.set_item("models", run.scores.models.iter().map(|m| m.spec.to_string()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Per-horizon MAFE and interval score over expanding-window origins.
#[pyfunction]
#[pyo3(signature = (surface, lam, fit_end_year, eval_end_year, alpha=0.2, components=None))]
fn rolling_origin<'py>(
    py: Python<'py>,
    surface: &PyRateSurface,
    lam: f64,
    fit_end_year: i32,
    eval_end_year: i32,
    alpha: f64,
    components: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let options = RollingOriginOptions {
        lambda: lambda(lam)?,
        alpha,
        components: rule(components),
    };
    let inner = &surface.inner;
    let table = py
        .detach(|| fertcast::rolling_origin(inner, fit_end_year, eval_end_year, &options))
        .map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("h", row.h)?;
            d.set_item("mafe", row.mafe)?;
            d.set_item("interval_score", row.interval_score)?;
            d.set_item("n_forecasts", row.n_forecasts)?;
            Ok(d)
        })
        .collect()
}

/// Lambda minimising the median rolling-origin error over the validation
/// years.
#[pyfunction]
#[pyo3(signature = (surface, test_fraction=0.2, criterion="point", method="brent", alpha=0.2, tolerance=1e-3, components=None))]
fn select_lambda<'py>(
    py: Python<'py>,
    surface: &PyRateSurface,
    test_fraction: f64,
    criterion: &str,
    method: &str,
    alpha: f64,
    tolerance: f64,
    components: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let options = SelectionOptions {
        criterion: criterion.parse::<Criterion>().map_err(to_py)?,
        method: method.parse::<Method>().map_err(to_py)?,
        alpha,
        tolerance,
        components: rule(components),
    };
    let inner = &surface.inner;
    let split: SampleSplit = fertcast::split_by_fraction(inner, test_fraction).map_err(to_py)?;
    let sel = py
        .detach(|| fertcast::optimize_lambda(inner, &split, &options))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lambda", sel.lambda_star.value())?;
    d.set_item("objective", sel.objective_value)?;
    d.set_item("evaluations", sel.evaluations)?;
    Ok(d)
}

fn arima_dict<'py>(py: Python<'py>, fit: &ArimaFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("order", (fit.spec.p, fit.spec.d, fit.spec.q))?;
    d.set_item("drift", fit.spec.drift)?;
    d.set_item("ar", fit.ar.clone())?;
    d.set_item("ma", fit.ma.clone())?;
    d.set_item("drift_coeff", fit.drift)?;
    d.set_item("sigma2", fit.sigma2)?;
    d.set_item("loglik", fit.loglik)?;
    d.set_item("aicc", fit.aicc)?;
    Ok(d)
}

/// Automatic ARIMA; with `horizon`, also point forecasts and variances.
#[pyfunction]
#[pyo3(signature = (series, horizon=None))]
fn auto_arima<'py>(py: Python<'py>, series: Vec<f64>, horizon: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let fit = arima::auto_select(&series).map_err(to_py)?;
    let d = arima_dict(py, &fit)?;
    if let Some(h) = horizon {
        let (points, variances) = fit.forecast(&series, h).map_err(to_py)?;
        d.set_item("forecast", points)?;
        d.set_item("variance", variances)?;
    }
    Ok(d)
}

/// Synthetic surface from a one-component model with known lambda.
#[pyfunction]
#[pyo3(signature = (lam=0.5, seed=1, n_years=60, n_ages=35, walk_sd=0.01, noise_sd=0.01))]
fn simulate(lam: f64, seed: u64, n_years: usize, n_ages: usize, walk_sd: f64, noise_sd: f64) -> PyResult<PyRateSurface> {
    let inner = fertcast::simulate::simulate_surface(&SimulationConfig {
        lambda: lam,
        seed,
        n_years,
        n_ages,
        walk_sd,
        noise_sd,
        ..Default::default()
    })
    .map_err(to_py)?;
    Ok(PyRateSurface { inner })
}

#[pymodule]
fn pyfertcast(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRateSurface>()?;
    m.add_function(wrap_pyfunction!(box_cox, m)?)?;
    m.add_function(wrap_pyfunction!(inv_box_cox, m)?)?;
    m.add_function(wrap_pyfunction!(interval_score, m)?)?;
    m.add_function(wrap_pyfunction!(mafe, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    m.add_function(wrap_pyfunction!(rolling_origin, m)?)?;
    m.add_function(wrap_pyfunction!(select_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(auto_arima, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
