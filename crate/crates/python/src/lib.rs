//! Python bindings for `rankset-core`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rankset_core::estimators::{emp_quantile_pooled, emp_quantile_srs, hd_srs, lf_srs, rss_hd as core_rss_hd, rss_lf as core_rss_lf};
use rankset_core::harness::{kendall as core_kendall, spearman as core_spearman};
use rankset_core::orss::{count_distribution as core_count_distribution, orss_weights as core_orss_weights};
use rankset_core::sampler::rss_sample as core_rss_sample;
use rankset_core::specfun::BetaParams;
use rankset_core::{
    run_experiment, Design, Distribution as CoreDistribution, Error, EstimatorId, ExperimentConfig, OrderedSample,
    OrssKind, RankingModel, RssSample, SeedSpec,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Quadrature { .. } | Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn ordered(values: Vec<f64>) -> PyResult<OrderedSample> {
    OrderedSample::from_unsorted(values).map_err(to_py)
}

#[pyfunction]
fn beta_cdf(a: f64, b: f64, t: f64) -> PyResult<f64> {
    BetaParams::new(a, b).and_then(|law| law.cdf(t)).map_err(to_py)
}

#[pyfunction]
fn beta_pdf(a: f64, b: f64, t: f64) -> PyResult<f64> {
    BetaParams::new(a, b).and_then(|law| law.pdf(t)).map_err(to_py)
}

/// Parent distribution, built from strings such as `"normal:0,1"`,
/// `"exp:1"` or `"weibull:2,1"`.
#[pyclass(name = "Distribution", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistribution(CoreDistribution);

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(to_py)
    }

    fn pdf(&self, y: f64) -> f64 {
        self.0.pdf(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.0.cdf(y)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.0.quantile(p).map_err(to_py)
    }

    fn mean_sd(&self) -> (f64, f64) {
        self.0.mean_sd()
    }

    fn __repr__(&self) -> String {
        format!("Distribution('{}')", self.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyfunction]
fn emp_quantile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    emp_quantile_srs(&ordered(values)?, p).map_err(to_py)
}

#[pyfunction]
fn lf_quantile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    lf_srs(&ordered(values)?, p).map_err(to_py)
}

#[pyfunction]
fn hd_quantile(values: Vec<f64>, p: f64) -> PyResult<f64> {
    hd_srs(&ordered(values)?, p).map_err(to_py)
}

/// `columns[r]` holds the `m` measurements judged at rank `r + 1`.
fn rss(columns: Vec<Vec<f64>>) -> PyResult<RssSample> {
    RssSample::from_columns(&columns).map_err(to_py)
}

#[pyfunction]
fn rss_emp(columns: Vec<Vec<f64>>, p: f64) -> PyResult<f64> {
    emp_quantile_pooled(&OrderedSample::pooled(&rss(columns)?), p).map_err(to_py)
}

#[pyfunction]
fn rss_lf(columns: Vec<Vec<f64>>, p: f64) -> PyResult<f64> {
    core_rss_lf(&rss(columns)?, p).map_err(to_py)
}

#[pyfunction]
fn rss_hd(columns: Vec<Vec<f64>>, p: f64) -> PyResult<f64> {
    core_rss_hd(&rss(columns)?, p).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (m, k, p, kind = "orss-hd"))]
fn orss_weights(m: usize, k: usize, p: f64, kind: &str) -> PyResult<Vec<f64>> {
    let kind: OrssKind = kind.parse().map_err(to_py)?;
    let design = Design::new(m, k).map_err(to_py)?;
    core_orss_weights(design, p, kind).map(|w| w.weights).map_err(to_py)
}

/// Probabilities of `0..=m*k` pooled values falling at or below
/// parent probability `t`.
#[pyfunction]
fn count_distribution(m: usize, k: usize, t: f64) -> PyResult<Vec<f64>> {
    let design = Design::new(m, k).map_err(to_py)?;
    core_count_distribution(design, t).map(|c| c.probs).map_err(to_py)
}

/// One RSS draw as a list of `k` rank columns.
#[pyfunction]
#[pyo3(signature = (dist, m, k, rho = 1.0, seed = 0, replicate = 0))]
fn rss_sample(dist: &PyDistribution, m: usize, k: usize, rho: f64, seed: u64, replicate: u64) -> PyResult<Vec<Vec<f64>>> {
    let design = Design::new(m, k).map_err(to_py)?;
    let model = RankingModel::from_rho(rho).map_err(to_py)?;
    let s = core_rss_sample(&dist.0, design, model, SeedSpec::new(seed, replicate));
    Ok((1..=k).map(|r| s.column(r)).collect())
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core_spearman(&x, &y).map_err(to_py)
}

#[pyfunction]
fn kendall(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core_kendall(&x, &y).map_err(to_py)
}

/// Monte Carlo study for one parent law; returns one dict per
/// (design, rho, p, estimator) cell.
#[pyfunction]
#[pyo3(signature = (dist, designs, p_grid, rho = vec![1.0], replicates = 20_000, seed = 42, estimators = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    dist: &PyDistribution,
    designs: Vec<(usize, usize)>,
    p_grid: Vec<f64>,
    rho: Vec<f64>,
    replicates: usize,
    seed: u64,
    estimators: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let designs = designs.into_iter().map(|(m, k)| Design::new(m, k)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let models = rho.into_iter().map(RankingModel::from_rho).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let mut cfg = ExperimentConfig::model(dist.0.clone(), designs, models, p_grid);
    cfg.replicates = replicates;
    cfg.master_seed = seed;
    if let Some(ids) = estimators {
        cfg.estimators = ids.iter().map(|s| s.parse::<EstimatorId>()).collect::<Result<_, _>>().map_err(to_py)?;
        cfg.orss_enabled = cfg.estimators.iter().any(|id| id.is_orss());
    }
    let result = py.detach(|| run_experiment(&cfg)).map_err(to_py)?;
    result
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("distribution", &r.distribution)?;
            d.set_item("rho", r.rho)?;
            d.set_item("m", r.m)?;
            d.set_item("k", r.k)?;
            d.set_item("p", r.p)?;
            d.set_item("estimator", r.estimator.as_str())?;
            d.set_item("bias", r.bias)?;
            d.set_item("mse", r.mse)?;
            d.set_item("re", r.re)?;
            d.set_item("mc_se", r.mc_se)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn rankset(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_function(wrap_pyfunction!(beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(beta_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(emp_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(lf_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(hd_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(rss_emp, m)?)?;
    m.add_function(wrap_pyfunction!(rss_lf, m)?)?;
    m.add_function(wrap_pyfunction!(rss_hd, m)?)?;
    m.add_function(wrap_pyfunction!(orss_weights, m)?)?;
    m.add_function(wrap_pyfunction!(count_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(rss_sample, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(kendall, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
