//! Python bindings for the bagvm engine.

use bagvm_core::format::{distribution_to_json, parse_distribution, round_json};
use bagvm_core::verify::{run_all, VerifyConfig};
use bagvm_core::vonmises::{self, InfluenceQuery};
use bagvm_core::{
    mc_bagged as core_mc_bagged, Decomposition, DiscreteDistribution, Error, MixtureSpec, Point, StatisticSpec,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

create_exception!(bagvm, BudgetExceeded, PyException, "Enumeration would exceed the configured budget.");

fn to_py(e: Error) -> PyErr {
    if e.is_budget() {
        BudgetExceeded::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn points(values: &[f64]) -> PyResult<Vec<Point>> {
    Point::from_values(values).map_err(to_py)
}

fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for item in a {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(o) => {
            let dict = PyDict::new(py);
            for (k, item) in o {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

/// Serializes a report to a Python dict, keeping full precision.
fn report<T: Serialize>(py: Python<'_>, r: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(r).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// A finitely supported distribution on the real line.
#[pyclass(name = "Distribution", module = "bagvm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: DiscreteDistribution,
}

#[pymethods]
impl PyDistribution {
    /// Uniform over `points` when `weights` is omitted. Duplicates merge.
    #[new]
    #[pyo3(signature = (points, weights=None))]
    fn new(points: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let p = self::points(&points)?;
        let inner = match weights {
            Some(w) => DiscreteDistribution::new(p, w),
            None => DiscreteDistribution::uniform(&p),
        }
        .map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    #[staticmethod]
    fn empirical(sample: Vec<f64>) -> PyResult<Self> {
        Ok(PyDistribution { inner: DiscreteDistribution::empirical(&points(&sample)?).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDistribution { inner: parse_distribution(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        distribution_to_json(&self.inner)
    }

    /// `(1 - Σ s_i) self + Σ s_i δ_{x_i}` for `contaminants = [(s_i, x_i), ...]`.
    fn mixture(&self, contaminants: Vec<(f64, f64)>) -> PyResult<Self> {
        let c = contaminants
            .into_iter()
            .map(|(s, x)| Point::new(x).map(|p| (s, p)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let inner = MixtureSpec::new(self.inner.clone(), c).realize().map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    #[getter]
    fn support(&self) -> Vec<f64> {
        self.inner.support().iter().map(|p| p.value()).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Distribution({})", self.to_json())
    }
}

/// A symmetric statistic, e.g. `Statistic("trimmed_mean:gamma=0.1")`.
#[pyclass(name = "Statistic", module = "bagvm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStatistic {
    inner: StatisticSpec,
}

#[pymethods]
impl PyStatistic {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyStatistic { inner: StatisticSpec::parse(spec).map_err(to_py)? })
    }

    /// The six built-ins with default parameters.
    #[staticmethod]
    fn builtins() -> Vec<PyStatistic> {
        StatisticSpec::all_builtins().into_iter().map(|inner| PyStatistic { inner }).collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    fn __call__(&self, sample: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&points(&sample)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Statistic({:?})", self.inner.id())
    }
}

/// Exact evaluator with a memo of partial expectations.
#[pyclass(name = "Engine", module = "bagvm", frozen)]
struct PyEngine {
    inner: bagvm_core::Engine,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (budget=bagvm_core::DEFAULT_BUDGET))]
    fn new(budget: u64) -> Self {
        PyEngine { inner: bagvm_core::Engine::with_budget(budget) }
    }

    #[getter]
    fn budget(&self) -> u64 {
        self.inner.budget()
    }

    fn cache_len(&self) -> usize {
        self.inner.cache_len()
    }

    fn clear_cache(&self) {
        self.inner.clear_cache()
    }

    /// `E θ(X_1..X_M)` with `X_i ~ dist` i.i.d.
    fn exact_bagged(&self, py: Python<'_>, stat: &PyStatistic, dist: &PyDistribution, m: usize) -> PyResult<f64> {
        py.detach(|| self.inner.exact_bagged(&stat.inner, &dist.inner, m)).map_err(to_py)
    }

    /// `E θ(fixed, X_{k+1}..X_M)`.
    #[pyo3(signature = (stat, dist, m, fixed=Vec::new()))]
    fn expect(&self, stat: &PyStatistic, dist: &PyDistribution, m: usize, fixed: Vec<f64>) -> PyResult<f64> {
        self.inner.expect_iid(&stat.inner, &dist.inner, m, &points(&fixed)?).map_err(to_py)
    }

    fn anova_term(&self, stat: &PyStatistic, dist: &PyDistribution, m: usize, points: Vec<f64>) -> PyResult<f64> {
        let d = Decomposition::new(&self.inner, &stat.inner, &dist.inner, m).map_err(to_py)?;
        d.term(&self::points(&points)?).map_err(to_py)
    }

    fn anova_reconstruct(&self, stat: &PyStatistic, dist: &PyDistribution, sample: Vec<f64>) -> PyResult<f64> {
        let d = Decomposition::new(&self.inner, &stat.inner, &dist.inner, sample.len()).map_err(to_py)?;
        d.reconstruct(&points(&sample)?).map_err(to_py)
    }

    /// `Σ_x F(x) α_k(points with x inserted at slot)`, slot counted from 1.
    fn marginal_residual(
        &self,
        stat: &PyStatistic,
        dist: &PyDistribution,
        m: usize,
        k: usize,
        points: Vec<f64>,
        slot: usize,
    ) -> PyResult<f64> {
        let d = Decomposition::new(&self.inner, &stat.inner, &dist.inner, m).map_err(to_py)?;
        d.marginal_residual(k, &self::points(&points)?, slot).map_err(to_py)
    }

    fn anova_report(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        dist: &PyDistribution,
        sample: Vec<f64>,
    ) -> PyResult<Py<PyAny>> {
        let d = Decomposition::new(&self.inner, &stat.inner, &dist.inner, sample.len()).map_err(to_py)?;
        report(py, &d.report(&points(&sample)?).map_err(to_py)?)
    }

    /// `ψ_k` of the bagged functional at `points` via `M!/(M-k)! α_k`.
    fn influence(&self, stat: &PyStatistic, dist: &PyDistribution, m: usize, points: Vec<f64>) -> PyResult<f64> {
        let p = self::points(&points)?;
        let q = InfluenceQuery { stat: &stat.inner, dist: &dist.inner, m, points: &p };
        vonmises::influence_theorem(&self.inner, &q).map_err(to_py)
    }

    /// `ψ_k` by finite differences along mixture directions.
    fn influence_numeric(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        dist: &PyDistribution,
        m: usize,
        points: Vec<f64>,
    ) -> PyResult<f64> {
        let p = self::points(&points)?;
        py.detach(|| {
            let q = InfluenceQuery { stat: &stat.inner, dist: &dist.inner, m, points: &p };
            vonmises::influence_numeric(&self.inner, &q)
        })
        .map_err(to_py)
    }

    fn vonmises_eval(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        base: &PyDistribution,
        m: usize,
        eval: &PyDistribution,
    ) -> PyResult<Py<PyAny>> {
        let r = vonmises::vonmises_eval(&self.inner, &stat.inner, &base.inner, m, &eval.inner).map_err(to_py)?;
        report(py, &r)
    }

    fn plug_in_expansion(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        base: &PyDistribution,
        m: usize,
        sample: Vec<f64>,
    ) -> PyResult<Py<PyAny>> {
        let r = vonmises::plug_in_expansion(&self.inner, &stat.inner, &base.inner, m, &points(&sample)?)
            .map_err(to_py)?;
        report(py, &r)
    }

    fn first_order_approx(&self, stat: &PyStatistic, base: &PyDistribution, m: usize, sample: Vec<f64>) -> PyResult<f64> {
        vonmises::first_order_approx(&self.inner, &stat.inner, &base.inner, m, &points(&sample)?).map_err(to_py)
    }

    fn superset_compare(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        base: &PyDistribution,
        sample: Vec<f64>,
    ) -> PyResult<Py<PyAny>> {
        let r = vonmises::superset_compare(&self.inner, &stat.inner, &base.inner, &points(&sample)?).map_err(to_py)?;
        report(py, &r)
    }

    #[pyo3(signature = (stat, base, x, m_list, grid=21))]
    fn smoothing_path(
        &self,
        py: Python<'_>,
        stat: &PyStatistic,
        base: &PyDistribution,
        x: f64,
        m_list: Vec<usize>,
        grid: usize,
    ) -> PyResult<Py<PyAny>> {
        let x = Point::new(x).map_err(to_py)?;
        let r = vonmises::smoothing_path(&self.inner, &stat.inner, &base.inner, x, &m_list, grid).map_err(to_py)?;
        report(py, &r)
    }
}

/// Monte Carlo bagging estimate as a dict.
#[pyfunction]
fn mc_bagged(
    py: Python<'_>,
    stat: &PyStatistic,
    dist: &PyDistribution,
    m: usize,
    replicates: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| core_mc_bagged(&stat.inner, &dist.inner, m, replicates, seed)).map_err(to_py)?;
    report(py, &r)
}

/// Runs the invariant suite and returns one dict per check.
#[pyfunction]
#[pyo3(signature = (m_max=5, seed=2024))]
fn verify(py: Python<'_>, m_max: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let config = VerifyConfig { m_max, seed, ..Default::default() };
    let results = py.detach(|| run_all(&bagvm_core::Engine::new(), &config));
    let v = serde_json::to_value(&results).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &round_json(v))
}

#[pymodule]
fn bagvm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyStatistic>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(mc_bagged, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("BudgetExceeded", m.py().get_type::<BudgetExceeded>())?;
    m.add("DEFAULT_BUDGET", bagvm_core::DEFAULT_BUDGET)?;
    Ok(())
}
