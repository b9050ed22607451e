//! Python bindings: penalties, bases and log-normal summaries, the
//! simulate, fit and plot commands, and read access to fit archives.

use std::path::{Path, PathBuf};

use panelgmrf::archive::{FitArchive, SummaryTable};
use panelgmrf::basis::{bspline_basis, center_basis};
use panelgmrf::fit::fit_command;
use panelgmrf::inference::lognormal_summary as lognormal;
use panelgmrf::penalty::{joint_weekly_penalty, penalty_matrix as penalty, PenaltySpec};
use panelgmrf::plot::plot_command;
use panelgmrf::simulate::{simulate as draw, SimConfig};
use panelgmrf::sparse::SymSparse;
use panelgmrf::table::save_table;
use panelgmrf::Error;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dense(q: &SymSparse) -> Vec<Vec<f64>> {
    q.to_dense()
}

/// Dense random-walk penalty matrix.
#[pyfunction]
#[pyo3(signature = (order, n, cyclic = true, jitter = 0.0))]
fn penalty_matrix(order: usize, n: usize, cyclic: bool, jitter: f64) -> PyResult<Vec<Vec<f64>>> {
    penalty(&PenaltySpec::new(order, cyclic, n).with_jitter(jitter))
        .map(|q| dense(&q))
        .map_err(to_py)
}

/// Dense 168×168 hour-of-week precision.
#[pyfunction]
#[pyo3(signature = (jitter = 0.0))]
fn weekly_penalty(jitter: f64) -> PyResult<Vec<Vec<f64>>> {
    joint_weekly_penalty(jitter).map(|q| dense(&q)).map_err(to_py)
}

/// B-spline basis at `x`, one row per point.
#[pyfunction]
#[pyo3(signature = (x, knots = 10, degree = 3, cyclic = true, xl = 1.0, xr = 365.0, center_on = None))]
fn basis(
    x: Vec<f64>,
    knots: usize,
    degree: usize,
    cyclic: bool,
    xl: f64,
    xr: f64,
    center_on: Option<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let mut b = bspline_basis(&x, knots, degree, cyclic, xl, xr).map_err(to_py)?;
    if let Some(grid) = center_on {
        b = center_basis(&b, &grid).map_err(to_py)?;
    }
    Ok((0..b.nrows()).map(|i| b.row(i).to_vec()).collect())
}

/// `(median, lower, upper)` of `exp(x)` for `x ~ N(mean, sd²)`.
#[pyfunction]
fn lognormal_summary(mean: f64, sd: f64) -> PyResult<(f64, f64, f64)> {
    let s = lognormal(mean, sd).map_err(to_py)?;
    Ok((s.median, s.lower, s.upper))
}

/// Writes a synthetic table to `out`; returns the row count.
#[pyfunction]
#[pyo3(signature = (out, seed = None, config = None))]
fn simulate(out: PathBuf, seed: Option<u64>, config: Option<PathBuf>) -> PyResult<usize> {
    let config = match config {
        Some(path) => SimConfig::load(&path).map_err(to_py)?,
        None => SimConfig::default(),
    };
    let (table, _) = draw(&config, seed.unwrap_or(config.seed)).map_err(to_py)?;
    save_table(&table, &out).map_err(to_py)?;
    Ok(table.len())
}

/// Fits the standard model, writes the archive to `out` and returns it.
#[pyfunction]
#[pyo3(signature = (data, out, config = None))]
fn fit(data: PathBuf, out: PathBuf, config: Option<PathBuf>) -> PyResult<Archive> {
    let output = fit_command(&data, config.as_deref(), &out).map_err(to_py)?;
    Ok(Archive { inner: output.archive })
}

/// Draws `what` from the archive; returns the written paths.
#[pyfunction]
#[pyo3(signature = (archive, what, out = None))]
fn plot(archive: PathBuf, what: &str, out: Option<PathBuf>) -> PyResult<Vec<PathBuf>> {
    let out = out.unwrap_or_else(|| archive.join("plots"));
    plot_command(&archive, what, &out).map_err(to_py)
}

/// A fit archive: posterior summary tables plus metadata.
#[pyclass(frozen)]
struct Archive {
    inner: FitArchive,
}

fn rows(t: &SummaryTable) -> Vec<(String, f64, f64)> {
    t.rows.iter().map(|r| (r.key.clone(), r.mean, r.sd)).collect()
}

#[pymethods]
impl Archive {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        FitArchive::read(Path::new(&path)).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.metadata.converged
    }

    #[getter]
    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.metadata.log_marginal_likelihood
    }

    #[getter]
    fn sites(&self) -> Vec<i64> {
        self.inner.metadata.sites.clone()
    }

    /// `{name: value}` of the estimated hyperparameters.
    #[getter]
    fn hyperparameters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for r in &self.inner.hyperparameters.rows {
            d.set_item(&r.key, r.mean)?;
        }
        Ok(d)
    }

    /// All-sites hour-of-week trend, or one site's, as `(key, mean, sd)` rows.
    #[pyo3(signature = (site = None))]
    fn trend(&self, site: Option<i64>) -> PyResult<Vec<(String, f64, f64)>> {
        match site {
            None => Ok(rows(&self.inner.trend_all)),
            Some(id) => self
                .inner
                .metadata
                .sites
                .iter()
                .position(|&s| s == id)
                .and_then(|k| self.inner.trend_sites.get(k))
                .map(rows)
                .ok_or_else(|| PyValueError::new_err(format!("archive has no trend table for site {id}"))),
        }
    }

    fn day_of_week(&self) -> Vec<(String, f64, f64)> {
        rows(&self.inner.dow_all)
    }

    fn annual(&self) -> Vec<(String, f64, f64)> {
        rows(&self.inner.annual)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner.metadata;
        format!(
            "Archive(n_obs={}, latent_dim={}, converged={}, log_marginal_likelihood={})",
            m.n_obs, m.latent_dim, m.converged, m.log_marginal_likelihood
        )
    }
}

#[pymodule]
pub fn panelgmrf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(penalty_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(weekly_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(basis, m)?)?;
    m.add_function(wrap_pyfunction!(lognormal_summary, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(plot, m)?)?;
    m.add_class::<Archive>()?;
    Ok(())
}
