//! Python bindings. Matrices cross the boundary as nested lists in Voigt order.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use stochhom_core::config::Config;
use stochhom_core::fem::{self, EffectiveSample, HexMesh, HomogeneousField, MaterialField, SolverOptions};
use stochhom_core::maxent::{self, ElasticityField};
use stochhom_core::spectral::{DimensionlessSdf, SpectralGrid};
use stochhom_core::{mc, Matrix6};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &Matrix6<f64>) -> Vec<Vec<f64>> {
    (0..6).map(|i| (0..6).map(|j| m[(i, j)]).collect()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix6<f64>> {
    if rows.len() != 6 || rows.iter().any(|r| r.len() != 6) {
        return Err(err("expected a 6x6 matrix"));
    }
    Ok(Matrix6::from_fn(|i, j| rows[i][j]))
}

fn parse_config(json: Option<&str>) -> PyResult<Config> {
    match json {
        Some(s) => Config::from_json(s).map_err(err),
        None => Ok(Config::default()),
    }
}

/// Effective elasticity of one realization.
#[pyclass(name = "EffectiveSample", frozen)]
struct PyEffectiveSample {
    #[pyo3(get)]
    kappa: u64,
    #[pyo3(get)]
    c_eff: Vec<Vec<f64>>,
    /// Eigenvalues, largest first.
    #[pyo3(get)]
    eigenvalues: Vec<f64>,
}

impl From<&EffectiveSample> for PyEffectiveSample {
    fn from(s: &EffectiveSample) -> Self {
        Self {
            kappa: s.kappa,
            c_eff: to_rows(&s.c_eff),
            eigenvalues: s.lambda.to_vec(),
        }
    }
}

#[pymethods]
impl PyEffectiveSample {
    fn __repr__(&self) -> String {
        format!("EffectiveSample(kappa={}, lambda1={:.6e})", self.kappa, self.eigenvalues[0])
    }
}

/// One realization of the random elasticity field.
#[pyclass(name = "ElasticityField", frozen)]
struct PyElasticityField {
    inner: ElasticityField,
}

#[pymethods]
impl PyElasticityField {
    /// Elasticity matrix (Pa) at `x` in the unit cube.
    fn eval(&self, x: [f64; 3]) -> PyResult<Vec<Vec<f64>>> {
        self.inner.eval(x).map(|m| to_rows(&m)).map_err(err)
    }

    /// Normalized matrix `[C(x)]`.
    fn eval_normalized(&self, x: [f64; 3]) -> PyResult<Vec<Vec<f64>>> {
        self.inner.eval_c(x).map(|m| to_rows(&m)).map_err(err)
    }

    /// `(gamma_c, gamma_elasticity)` almost-sure Frobenius bounds.
    fn certificate(&self) -> (f64, f64) {
        let c = self.inner.certificate();
        (c.gamma_c, c.gamma_elast)
    }

    #[getter]
    fn support_scales(&self) -> [f64; 3] {
        self.inner.params.w
    }

    /// Homogenizes this realization on an `n x n x n` mesh.
    fn homogenize(&self, n: usize) -> PyResult<PyEffectiveSample> {
        let mesh = HexMesh::new(n).map_err(err)?;
        let (eff, _, _) = fem::homogenize(&mesh, &self.inner, &SolverOptions::default()).map_err(err)?;
        Ok((&eff).into())
    }
}

/// Monte Carlo campaign built from a JSON configuration.
#[pyclass(name = "Campaign", frozen)]
struct PyCampaign {
    inner: mc::Campaign,
    eta: Vec<f64>,
    kde_points: usize,
}

#[pymethods]
impl PyCampaign {
    #[new]
    #[pyo3(signature = (config_json=None))]
    fn new(config_json: Option<&str>) -> PyResult<Self> {
        let cfg = parse_config(config_json)?;
        Ok(Self {
            inner: mc::Campaign::from_config(&cfg).map_err(err)?,
            eta: cfg.eta,
            kde_points: cfg.kde_points,
        })
    }

    #[getter]
    fn kappa(&self) -> usize {
        self.inner.kappa_sim
    }

    #[getter]
    fn mean_elasticity(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.mean.c_bar())
    }

    fn field(&self, kappa: u64) -> PyResult<PyElasticityField> {
        Ok(PyElasticityField {
            inner: self.inner.field(kappa).map_err(err)?,
        })
    }

    fn realization(&self, py: Python<'_>, kappa: u64) -> PyResult<PyEffectiveSample> {
        let r = py.detach(|| self.inner.realization(kappa)).map_err(err)?;
        Ok((&r).into())
    }

    /// Runs every realization; failed ones are skipped.
    #[pyo3(signature = (threads=None))]
    fn run(&self, py: Python<'_>, threads: Option<usize>) -> PyResult<Vec<PyEffectiveSample>> {
        let out = py.detach(|| self.inner.run_with_threads(threads)).map_err(err)?;
        Ok(out.records.iter().map(Into::into).collect())
    }

    /// Statistics of a list of samples: a dict with `conv`, `mean_lambda1`,
    /// `lambda1_normalized`, `p_eta` and, when available, `pdf_grid`, `pdf`.
    fn statistics<'py>(
        &self,
        py: Python<'py>,
        samples: Vec<PyRef<'py, PyEffectiveSample>>,
    ) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let records: Vec<EffectiveSample> = samples
            .iter()
            .map(|s| {
                let c = from_rows(s.c_eff.clone())?;
                let mut lambda = [0.0; 6];
                lambda.copy_from_slice(&s.eigenvalues);
                Ok(EffectiveSample {
                    kappa: s.kappa,
                    c_eff: c,
                    lambda,
                    raw_asymmetry: 0.0,
                })
            })
            .collect::<PyResult<_>>()?;
        let st = mc::campaign_stats(&records, &self.inner.mean, &self.eta, self.kde_points).map_err(err)?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("conv", st.conv)?;
        d.set_item("mean_lambda1", st.mean_lambda1)?;
        d.set_item("lambda1_normalized", st.lambda1_normalized)?;
        d.set_item("p_eta", st.p_eta)?;
        if let Some(k) = st.pdf {
            d.set_item("pdf_grid", k.grid)?;
            d.set_item("pdf", k.density)?;
        }
        Ok(d)
    }
}

/// `h(b; alpha)`: maps a standard normal value to a Gamma(alpha, 1) value.
#[pyfunction]
fn h_transform(b: f64, alpha: f64) -> PyResult<f64> {
    maxent::h_transform(b, alpha).map_err(err)
}

/// Spectral points, weights and their sum for the triangular density.
#[pyfunction]
fn spectral_grid(nu_s: usize) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let g = SpectralGrid::build(nu_s, &DimensionlessSdf::triangular()).map_err(err)?;
    Ok((g.tau().to_vec(), g.chi_delta().to_vec(), g.eta_nu()))
}

/// Mean elasticity matrix of a configuration.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn mean_elasticity(config_json: Option<&str>) -> PyResult<Vec<Vec<f64>>> {
    let d = parse_config(config_json)?.derive().map_err(err)?;
    Ok(to_rows(d.mean.c_bar()))
}

/// Effective matrix of a homogeneous material; reproduces the input.
#[pyfunction]
fn homogenize_homogeneous(c: Vec<Vec<f64>>, n: usize) -> PyResult<PyEffectiveSample> {
    let field = HomogeneousField(from_rows(c)?);
    let mesh = HexMesh::new(n).map_err(err)?;
    let (eff, _, _) = fem::homogenize(&mesh, &field, &SolverOptions::default()).map_err(err)?;
    Ok((&eff).into())
}

/// Probability that a sample falls in `(1 - eta, 1 + eta]`.
#[pyfunction]
fn prob_band(samples: Vec<f64>, eta: f64) -> f64 {
    mc::prob_band(&samples, eta)
}

/// Default configuration as JSON.
#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&Config::default()).expect("config serializes")
}

#[pymodule]
fn pystochhom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCampaign>()?;
    m.add_class::<PyElasticityField>()?;
    m.add_class::<PyEffectiveSample>()?;
    m.add_function(wrap_pyfunction!(h_transform, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_grid, m)?)?;
    m.add_function(wrap_pyfunction!(mean_elasticity, m)?)?;
    m.add_function(wrap_pyfunction!(homogenize_homogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(prob_band, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
