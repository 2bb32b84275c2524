//! Python bindings for `mifs`.

use mifs::data::{self, FriedmanVariant, SplitSpec, TargetColumn};
use mifs::forward::{self, ForwardConfig, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use mifs::rng::seeded;
use mifs::tuner::{self, TunerConfig, DEFAULT_FOLDS};
use mifs::{KsgConfig, MiQuery};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: mifs::Error) -> PyErr {
    match err {
        mifs::Error::Io { .. } => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Feature matrix plus real target.
#[pyclass(name = "Dataset", module = "mifs_py", frozen)]
struct PyDataset {
    inner: mifs::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (columns, target, names = None, target_name = "Y".to_string()))]
    fn new(
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        names: Option<Vec<String>>,
        target_name: String,
    ) -> PyResult<Self> {
        let names = names.unwrap_or_else(|| (1..=columns.len()).map(|j| format!("X{j}")).collect());
        let inner = mifs::Dataset::new(columns, target, names, target_name).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Friedman-style synthetic regression (10 inputs, first 5 informative).
    #[staticmethod]
    #[pyo3(signature = (n, seed = 1, pi = false))]
    fn friedman(n: usize, seed: u64, pi: bool) -> PyResult<Self> {
        let variant = if pi { FriedmanVariant::Pi } else { FriedmanVariant::Plain };
        let inner = data::friedman_generate(n, variant, &mut seeded(seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Target is a column name, a 0-based index, or the last column when omitted.
    #[staticmethod]
    #[pyo3(signature = (path, target = None, header = true))]
    fn load_csv(path: &str, target: Option<&str>, header: bool) -> PyResult<Self> {
        let target = match target {
            None => TargetColumn::Last,
            Some(t) => match t.parse() {
                Ok(t) => t,
                Err(never) => match never {},
            },
        };
        let inner = data::load_csv(path, &target, header).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn target_name(&self) -> String {
        self.inner.target_name().to_string()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.n_features() {
            return Err(PyValueError::new_err(format!("no feature {j}")));
        }
        Ok(self.inner.column(j).to_vec())
    }

    fn target(&self) -> Vec<f64> {
        self.inner.target().to_vec()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    /// Seeded shuffle into `(train, test)`; give `train_fraction` or both sizes.
    #[pyo3(signature = (train_fraction = None, train = None, test = None, seed = 1))]
    fn split(
        &self,
        train_fraction: Option<f64>,
        train: Option<usize>,
        test: Option<usize>,
        seed: u64,
    ) -> PyResult<(PyDataset, PyDataset)> {
        let spec = match (train_fraction, train, test) {
            (Some(f), None, None) => SplitSpec::TrainFraction(f),
            (None, Some(train), Some(test)) => SplitSpec::Sizes { train, test },
            _ => return Err(PyValueError::new_err("give train_fraction or both train and test")),
        };
        let (a, b) = data::split(&self.inner, spec, &mut seeded(seed)).map_err(to_py)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }))
    }

    #[pyo3(signature = (amplitude, seed = 1))]
    fn jitter(&self, amplitude: f64, seed: u64) -> PyResult<PyDataset> {
        let inner = self.inner.jitter(amplitude, &mut seeded(seed)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_rows={}, n_features={}, target={:?})",
            self.inner.n_rows(),
            self.inner.n_features(),
            self.inner.target_name()
        )
    }
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    mifs::estimator::digamma(x).map_err(to_py)
}

/// MI in nats between the listed features (jointly) and the target.
#[pyfunction]
#[pyo3(signature = (data, features, k = 6, standardize = true, rows = None))]
fn estimate_mi(
    py: Python<'_>,
    data: &PyDataset,
    features: Vec<usize>,
    k: usize,
    standardize: bool,
    rows: Option<Vec<usize>>,
) -> PyResult<f64> {
    let query = MiQuery::new(features, KsgConfig::new(k).with_standardize(standardize)).map_err(to_py)?;
    let rows = rows.unwrap_or_else(|| (0..data.inner.n_rows()).collect());
    let inner = &data.inner;
    py.detach(|| mifs::estimate_mi(inner, &rows, &query))
        .map(|e| e.value)
        .map_err(to_py)
}

/// Tunes k; returns a dict with `k_star`, `argmax_feature`, `t_max`,
/// `k_values` and the `t_grid` (features × k).
#[pyfunction]
#[pyo3(signature = (data, k_min = 1, k_max = 20, folds = DEFAULT_FOLDS, standardize = true, seed = 1))]
fn select_k<'py>(
    py: Python<'py>,
    data: &PyDataset,
    k_min: usize,
    k_max: usize,
    folds: usize,
    standardize: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = TunerConfig {
        k_min,
        k_max,
        folds,
        standardize,
    };
    let inner = &data.inner;
    let sel = py
        .detach(|| tuner::select_k(inner, &config, &mut seeded(seed)))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("k_star", sel.k_star)?;
    out.set_item("argmax_feature", sel.argmax_feature)?;
    out.set_item("t_max", sel.t_max)?;
    out.set_item("k_values", sel.k_values)?;
    out.set_item("t_grid", sel.t_grid)?;
    Ok(out)
}

/// Forward search with the permutation stopping rule. Returns the full trace
/// as a dict, plus `max_mi_subset` for the peak-MI baseline.
#[pyfunction]
#[pyo3(signature = (
    data, k, alpha = DEFAULT_ALPHA, permutations = DEFAULT_PERMUTATIONS,
    max_features = None, full_path = false, standardize = true, seed = 1
))]
#[allow(clippy::too_many_arguments)]
fn forward_select<'py>(
    py: Python<'py>,
    data: &PyDataset,
    k: usize,
    alpha: f64,
    permutations: usize,
    max_features: Option<usize>,
    full_path: bool,
    standardize: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let config = ForwardConfig {
        ksg: KsgConfig::new(k).with_standardize(standardize),
        alpha,
        permutations,
        max_features,
        full_path,
    };
    let inner = &data.inner;
    let trace = py
        .detach(|| forward::forward_select(inner, &config, &mut seeded(seed)))
        .map_err(to_py)?;
    let text = serde_json::to_string(&trace).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let dict = py.import("json")?.call_method1("loads", (text,))?;
    dict.set_item("max_mi_subset", forward::max_mi_subset(&trace))?;
    Ok(dict)
}

/// Test-set RMSE of a kNN regressor on the given features.
#[pyfunction]
#[pyo3(signature = (train, test, features, k_reg = mifs::eval::DEFAULT_K_REG))]
fn knn_rmse(py: Python<'_>, train: &PyDataset, test: &PyDataset, features: Vec<usize>, k_reg: usize) -> PyResult<f64> {
    let (a, b) = (&train.inner, &test.inner);
    py.detach(|| mifs::knn_rmse(a, b, &features, k_reg))
        .map(|r| r.rmse)
        .map_err(to_py)
}

#[pymodule]
fn mifs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mi, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(forward_select, m)?)?;
    m.add_function(wrap_pyfunction!(knn_rmse, m)?)?;
    Ok(())
}
