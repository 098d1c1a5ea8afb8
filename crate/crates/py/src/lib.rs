//! Python bindings for the homestop solver.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use homestop::chf::{self, SeriesControl};
use homestop::cli::{CliError, Model as CoreModel, RunConfig};
use homestop::mc::{self, Direction, Scheme, SimConfig};

fn num_err(e: homestop::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Gamma function.
#[pyfunction]
fn gamma(x: f64) -> PyResult<f64> {
    chf::gamma::gamma(x).map_err(num_err)
}

/// Kummer's confluent hypergeometric function M(a, b, z).
#[pyfunction]
fn kummer_m(a: f64, b: f64, z: f64) -> PyResult<f64> {
    chf::kummer_m(a, b, z, &SeriesControl::default()).map_err(num_err)
}

/// Tricomi's confluent hypergeometric function U(a, b, z).
#[pyfunction]
fn tricomi_u(a: f64, b: f64, z: f64) -> PyResult<f64> {
    chf::tricomi_u(a, b, z, &SeriesControl::default()).map_err(num_err)
}

/// Solved buy and sell problems.
///
/// `Model(config=None, path=None)`: start from the defaults, apply the
/// settings in the file at `path`, then the entries of the `config` dict
/// (same keys as the configuration file).
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: CoreModel,
}

fn value_text(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = v.extract::<bool>() {
        return Ok(b.to_string());
    }
    if let Ok(x) = v.extract::<f64>() {
        return Ok(format!("{x:e}"));
    }
    Ok(v.str()?.to_string())
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (config=None, path=None))]
    fn new(
        config: Option<HashMap<String, Bound<'_, PyAny>>>,
        path: Option<String>,
    ) -> PyResult<Self> {
        let mut cfg = match path {
            Some(p) => RunConfig::load(std::path::Path::new(&p)).map_err(cli_err)?,
            None => RunConfig::default(),
        };
        if let Some(entries) = config {
            let mut keys: Vec<_> = entries.keys().cloned().collect();
            keys.sort();
            for k in keys {
                let text = if k == "output_dir" || k == "discount_mode" || k == "mc_scheme" {
                    entries[&k].str()?.to_string()
                } else {
                    value_text(&entries[&k])?
                };
                cfg.set(&k, &text).map_err(cli_err)?;
            }
        }
        let inner = CoreModel::solve(&cfg).map_err(cli_err)?;
        Ok(Self { inner })
    }

    /// Selling threshold r_s.
    #[getter]
    fn r_sell(&self) -> f64 {
        self.inner.r_sell()
    }

    /// Buying threshold r_b.
    #[getter]
    fn r_buy(&self) -> f64 {
        self.inner.r_buy()
    }

    fn value_sell(&self, r: f64) -> PyResult<f64> {
        self.inner.sell.evaluate(r).map_err(num_err)
    }

    fn value_buy(&self, r: f64) -> PyResult<f64> {
        self.inner.buy.evaluate(r).map_err(num_err)
    }

    fn payoff_sell(&self, r: f64) -> PyResult<f64> {
        self.inner.sell.payoff().value(r).map_err(num_err)
    }

    fn payoff_buy(&self, r: f64) -> PyResult<f64> {
        self.inner.buy.payoff().value(r).map_err(num_err)
    }

    /// Increasing and decreasing fundamental solutions at r.
    fn fundamental(&self, r: f64) -> PyResult<(f64, f64)> {
        let v = self.inner.pair.eval(r).map_err(num_err)?;
        Ok((v.u_plus, v.u_minus))
    }

    /// Expected waits and series masses at the hitting levels.
    fn expectations(&self) -> PyResult<HashMap<&'static str, f64>> {
        let s = self
            .inner
            .default_waiting_times()
            .map_err(cli_err)?
            .summary();
        Ok(HashMap::from([
            ("buy_level", s.buy_level),
            ("sell_level", s.sell_level),
            ("buy_mean", s.buy_mean),
            ("sell_mean", s.sell_mean),
            ("total_mean", s.total_mean),
            ("buy_mass", s.buy_mass),
            ("sell_mass", s.sell_mass),
        ]))
    }

    /// Waiting-time density ("buy", "sell" or "total") at each time.
    fn density(&self, kind: &str, times: Vec<f64>) -> PyResult<Vec<f64>> {
        let w = self.inner.default_waiting_times().map_err(cli_err)?;
        let total = w.total();
        let f = |t: f64| match kind {
            "buy" => Ok(w.buy.evaluate(t)),
            "sell" => Ok(w.sell.evaluate(t)),
            "total" => Ok(total.evaluate(t)),
            other => Err(PyValueError::new_err(format!(
                "unknown density kind '{other}'"
            ))),
        };
        times.into_iter().map(f).collect()
    }

    /// Monte Carlo first passage from r0 to `level`.
    #[pyo3(signature = (r0, level, n_paths=10_000, dt=1e-3, horizon=200.0, seed=1, exact=false))]
    #[allow(clippy::too_many_arguments)]
    fn simulate_hitting(
        &self,
        py: Python<'_>,
        r0: f64,
        level: f64,
        n_paths: usize,
        dt: f64,
        horizon: f64,
        seed: u64,
        exact: bool,
    ) -> PyResult<HashMap<&'static str, f64>> {
        let scheme = if exact {
            Scheme::ExactTransition
        } else {
            Scheme::FullTruncationEuler
        };
        let sim = SimConfig {
            n_paths,
            dt,
            horizon,
            seed,
            scheme,
            ..SimConfig::default()
        };
        let dir = if level >= r0 {
            Direction::Up
        } else {
            Direction::Down
        };
        let cfg = &self.inner.config;
        let s = py
            .detach(|| mc::simulate_hitting(&cfg.cir, &cfg.discount, r0, level, dir, &sim))
            .map_err(num_err)?;
        Ok(HashMap::from([
            ("hit_fraction", s.hit_fraction),
            ("mean_hitting_time", s.mean_hitting_time),
            ("se_hitting_time", s.se_hitting_time),
            ("discount_factor_mean", s.lambda_factor_mean),
            ("discount_factor_se", s.lambda_factor_se),
        ]))
    }
}

#[pymodule]
fn homestop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(kummer_m, m)?)?;
    m.add_function(wrap_pyfunction!(tricomi_u, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
