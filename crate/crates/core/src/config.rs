//! Run configuration (JSON). Lengths are in units of the cell side, moduli in Pa.

use serde::{Deserialize, Serialize};

use crate::fem::{HexMesh, SolverOptions};
use crate::maxent::{MatrixFieldParams, MeanElasticity, OrthotropicConstants, DEFAULT_EPSILON};
use crate::spectral::{DimensionlessSdf, SpectralGrid, SpectrumDistribution, DEFAULT_ETA_TOLERANCE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub cap_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            rel_tol: d.rel_tol,
            cap_factor: d.cap_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub corr_lengths: Vec<f64>,
    /// Values used for both the correlation-length and the spectrum-shape uncertainty.
    pub deltas: Vec<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            corr_lengths: vec![0.2, 0.4, 0.6],
            deltas: vec![0.0, 0.2, 0.3, 0.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Spectral points per axis (even).
    pub nu_s: usize,
    /// Mean correlation length.
    pub corr_length: f64,
    /// Coefficient of variation of the correlation length.
    pub delta_lc: f64,
    /// Spectrum-shape uncertainty per axis.
    pub delta_shape: [f64; 3],
    /// Dispersion of the normalized matrix field.
    pub delta_c: f64,
    pub epsilon: f64,
    pub mean: OrthotropicConstants,
    /// Elements per axis.
    pub mesh: usize,
    /// Number of realizations.
    pub kappa: usize,
    /// Half-widths for the probability band table.
    pub eta: Vec<f64>,
    pub kde_points: usize,
    pub eta_tolerance: f64,
    pub solver: SolverConfig,
    /// Points per axis of the cell-centred grid written by `sample-field`.
    pub sample_grid: [usize; 3],
    pub study: StudyConfig,
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            nu_s: 8,
            corr_length: 0.2,
            delta_lc: 0.0,
            delta_shape: [0.0; 3],
            delta_c: 0.4,
            epsilon: DEFAULT_EPSILON,
            mean: OrthotropicConstants::default(),
            mesh: 10,
            kappa: 200,
            eta: (1..=100).map(|k| k as f64 / 100.0).collect(),
            kde_points: 512,
            eta_tolerance: DEFAULT_ETA_TOLERANCE,
            solver: SolverConfig::default(),
            sample_grid: [2, 2, 2],
            study: StudyConfig::default(),
            threads: None,
        }
    }
}

/// Objects derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Derived {
    pub grid: SpectralGrid,
    pub dist: SpectrumDistribution,
    pub mfp: MatrixFieldParams,
    pub mean: MeanElasticity,
    pub mesh: HexMesh,
    pub solver: SolverOptions,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    /// Sets both spectrum uncertainty levels to `delta`.
    pub fn with_uncertainty(mut self, corr_length: f64, delta: f64) -> Self {
        self.corr_length = corr_length;
        self.delta_lc = delta;
        self.delta_shape = [delta; 3];
        self
    }

    pub fn derive(&self) -> Result<Derived> {
        if self.kappa == 0 {
            return Err(Error::InvalidArgument("kappa must be at least 1".into()));
        }
        if let Some(e) = self.eta.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::InvalidArgument(format!("eta values must lie in (0, 1], got {e}")));
        }
        if self.kde_points < 2 {
            return Err(Error::InvalidArgument("kde_points must be at least 2".into()));
        }
        if self.sample_grid.contains(&0) {
            return Err(Error::InvalidArgument("sample_grid entries must be positive".into()));
        }
        if !(self.solver.rel_tol > 0.0) || !(self.solver.cap_factor > 0.0) {
            return Err(Error::InvalidArgument("solver settings must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        let grid = SpectralGrid::build(self.nu_s, &DimensionlessSdf::triangular())?;
        if !grid.passes_gate(self.eta_tolerance) {
            log::warn!("spectral weights sum to {} (tolerance {})", grid.eta_nu(), self.eta_tolerance);
        }
        Ok(Derived {
            grid,
            dist: SpectrumDistribution::new(self.corr_length, self.delta_lc, self.delta_shape)?,
            mfp: MatrixFieldParams::new(self.delta_c, self.epsilon)?,
            mean: MeanElasticity::orthotropic(&self.mean)?,
            mesh: HexMesh::new(self.mesh)?,
            solver: SolverOptions {
                rel_tol: self.solver.rel_tol,
                cap_factor: self.solver.cap_factor,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::default();
        let d = c.derive().unwrap();
        assert_eq!(d.grid.len(), 512);
        assert!((d.mfp.alpha()[0] - 21.875).abs() < 1e-12);
        assert!(c.eta.contains(&0.02) && c.eta.contains(&0.04) && c.eta.contains(&0.08));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = Config::from_json(r#"{"mesh": 5, "kappa": 3, "mean": {"young": [1e9, 1e9, 1e9], "nu23": 0.2, "nu31": 0.2, "nu12": 0.2}}"#).unwrap();
        assert_eq!(c.mesh, 5);
        assert_eq!(c.nu_s, 8);
        assert_eq!(c.mean.shear, None);
        assert!(c.derive().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_json(r#"{"unknown": 1}"#).is_err());
        let c = Config {
            nu_s: 3,
            ..Config::default()
        };
        assert!(c.derive().is_err());
        let c = Config {
            eta: vec![0.0],
            ..Config::default()
        };
        assert!(c.derive().is_err());
        assert!(Config::default().with_uncertainty(0.2, 0.6).derive().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let c = Config::default().with_uncertainty(0.4, 0.3);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&s).unwrap(), c);
    }
}
