//! Discretized dimensionless spectral measure and its uncertain parameterization.
//!
//! The spectral density is separable, `chi(tau) = chi_1(tau_1) chi_2(tau_2) chi_3(tau_3)`,
//! supported on `[-1, 1]^3`. It is sampled at the midpoints of a regular grid with
//! `nu_s` points per axis. The uncertain spectrum rescales the sampled weights by a
//! shape factor driven by a `3 x nu_s/2` matrix `y` in `[0, 1]`, mirrored across each
//! axis so that quadrant symmetry is preserved.

use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used for the `|eta_nu - 1| <= eps_s` gate.
pub const DEFAULT_ETA_TOLERANCE: f64 = 1e-6;

/// Deltas at or above this value could drive the affine shape factor to zero.
pub const MAX_SHAPE_DELTA: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// One-dimensional factor of a separable dimensionless spectral density.
pub trait AxisDensity: Send + Sync {
    fn eval(&self, tau: f64) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

/// `chi_j(tau) = (1 - |tau|)` on `[-1, 1]`, zero outside.
#[derive(Debug, Clone, Copy, Default)]
pub struct Triangular;

impl AxisDensity for Triangular {
    fn eval(&self, tau: f64) -> f64 {
        let a = tau.abs();
        if a <= 1.0 {
            1.0 - a
        } else {
            0.0
        }
    }

    fn name(&self) -> &str {
        "triangular"
    }
}

/// Separable dimensionless spectral density with compact support `[-1, 1]^3`.
#[derive(Clone)]
pub struct DimensionlessSdf {
    axes: [Arc<dyn AxisDensity>; 3],
}

impl fmt::Debug for DimensionlessSdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DimensionlessSdf")
            .field("axes", &[self.axes[0].name(), self.axes[1].name(), self.axes[2].name()])
            .finish()
    }
}

impl Default for DimensionlessSdf {
    fn default() -> Self {
        Self::triangular()
    }
}

impl DimensionlessSdf {
    pub fn triangular() -> Self {
        let t: Arc<dyn AxisDensity> = Arc::new(Triangular);
        Self {
            axes: [t.clone(), t.clone(), t],
        }
    }

    /// Builds a separable density from user-supplied axis factors.
    ///
    /// Each factor must be nonnegative, even, vanish outside `[-1, 1]` and integrate
    /// to one over `[-1, 1]`; the checks are numerical.
    pub fn separable(axes: [Arc<dyn AxisDensity>; 3]) -> Result<Self> {
        for (j, axis) in axes.iter().enumerate() {
            check_axis_density(j, axis.as_ref())?;
        }
        Ok(Self { axes })
    }

    pub fn axis(&self, j: usize) -> &dyn AxisDensity {
        self.axes[j].as_ref()
    }

    pub fn eval(&self, tau: [f64; 3]) -> f64 {
        (0..3).map(|j| self.axes[j].eval(tau[j])).product()
    }
}

fn check_axis_density(j: usize, axis: &dyn AxisDensity) -> Result<()> {
    // composite Simpson with a node at tau = 0
    const HALF_INTERVALS: usize = 20_000;
    let n = 2 * HALF_INTERVALS;
    let h = 2.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let tau = -1.0 + i as f64 * h;
        let v = axis.eval(tau);
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "axis {j} density is negative or not finite at tau = {tau}"
            )));
        }
        if (v - axis.eval(-tau)).abs() > 1e-12 * v.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "axis {j} density is not even at tau = {tau}"
            )));
        }
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * v;
    }
    let integral = sum * h / 3.0;
    for tau in [1.0 + 1e-9, 1.5, 3.0] {
        if axis.eval(tau) != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "axis {j} density does not vanish outside [-1, 1] (tau = {tau})"
            )));
        }
    }
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "axis {j} density integrates to {integral}, expected 1"
        )));
    }
    Ok(())
}

/// Midpoint sampling of `[-1, 1]^3` with `nu_s` points per axis and the sampled
/// weights `chi_delta = (2/nu_s)^3 chi(tau)`.
///
/// Multi-indices `beta = (b1, b2, b3)` are zero-based and flattened row-major:
/// `flat = (b1 * nu_s + b2) * nu_s + b3`.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    nu_s: usize,
    tau: Vec<f64>,
    axis_weights: [Vec<f64>; 3],
    chi_delta: Vec<f64>,
    eta_nu: f64,
}

impl SpectralGrid {
    pub fn build(nu_s: usize, sdf: &DimensionlessSdf) -> Result<Self> {
        if nu_s < 2 || !nu_s.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "nu_s must be a positive even integer, got {nu_s}"
            )));
        }
        let step = 2.0 / nu_s as f64;
        let half = nu_s / 2;
        let mut tau: Vec<f64> = (0..half).map(|b| -1.0 + (b as f64 + 0.5) * step).collect();
        // exact sign symmetry: the upper half mirrors the lower one
        for b in half..nu_s {
            tau.push(-tau[nu_s - 1 - b]);
        }
        let axis_weights: [Vec<f64>; 3] = std::array::from_fn(|j| {
            tau.iter().map(|&t| step * sdf.axis(j).eval(t)).collect()
        });
        let mut chi_delta = Vec::with_capacity(nu_s * nu_s * nu_s);
        for b1 in 0..nu_s {
            for b2 in 0..nu_s {
                for b3 in 0..nu_s {
                    chi_delta.push(axis_weights[0][b1] * axis_weights[1][b2] * axis_weights[2][b3]);
                }
            }
        }
        let eta_nu = chi_delta.iter().sum();
        let grid = Self {
            nu_s,
            tau,
            axis_weights,
            chi_delta,
            eta_nu,
        };
        if !grid.passes_gate(DEFAULT_ETA_TOLERANCE) {
            warn!(
                "spectral grid with nu_s = {nu_s} has eta_nu = {eta_nu}, outside 1 +/- {DEFAULT_ETA_TOLERANCE}"
            );
        }
        Ok(grid)
    }

    pub fn nu_s(&self) -> usize {
        self.nu_s
    }

    /// Number of columns of the shape matrix `y`.
    pub fn half(&self) -> usize {
        self.nu_s / 2
    }

    /// Total number of grid points `nu = nu_s^3`.
    pub fn len(&self) -> usize {
        self.chi_delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi_delta.is_empty()
    }

    /// Sampling points along one axis.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn axis_weights(&self, j: usize) -> &[f64] {
        &self.axis_weights[j]
    }

    pub fn chi_delta(&self) -> &[f64] {
        &self.chi_delta
    }

    pub fn eta_nu(&self) -> f64 {
        self.eta_nu
    }

    pub fn passes_gate(&self, eps_s: f64) -> bool {
        (self.eta_nu - 1.0).abs() <= eps_s
    }

    pub fn flat_index(&self, beta: [usize; 3]) -> usize {
        (beta[0] * self.nu_s + beta[1]) * self.nu_s + beta[2]
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.nu_s;
        [flat / (n * n), (flat / n) % n, flat % n]
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let b = self.multi_index(flat);
        [self.tau[b[0]], self.tau[b[1]], self.tau[b[2]]]
    }

    /// Index of the sign-flipped sampling point along one axis.
    pub fn mirror(&self, b: usize) -> usize {
        self.nu_s - 1 - b
    }

    /// Column of `y` that drives axis index `b` (first half direct, second half mirrored).
    pub fn shape_column(&self, b: usize) -> usize {
        if b < self.half() {
            b
        } else {
            self.mirror(b)
        }
    }
}

/// Shape factor `q(y; delta)` of one axis, with `q(1/2; delta) = 1`.
pub trait ShapeFactor: Send + Sync {
    fn q(&self, y: f64, delta: f64) -> f64;

    /// Rejects deltas for which the factor is not guaranteed positive on `[0, 1]`.
    fn check_delta(&self, delta: f64) -> Result<()>;
}

/// `q(y; delta) = 1 + sqrt(12) delta (y - 1/2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AffineShape;

impl ShapeFactor for AffineShape {
    fn q(&self, y: f64, delta: f64) -> f64 {
        1.0 + 12f64.sqrt() * delta * (y - 0.5)
    }

    fn check_delta(&self, delta: f64) -> Result<()> {
        if !(0.0..MAX_SHAPE_DELTA).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "spectrum uncertainty level must lie in [0, 1/sqrt(3)), got {delta}"
            )));
        }
        Ok(())
    }
}

/// Spectrum parameters: support scales `w_j = pi / K_j` and the shape matrix `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub w: [f64; 3],
    pub y: [Vec<f64>; 3],
}

impl SpectrumParams {
    /// Parameters at the mean shape point `y = 1/2`.
    pub fn at_mean_shape(w: [f64; 3], half: usize) -> Self {
        Self {
            w,
            y: std::array::from_fn(|_| vec![0.5; half]),
        }
    }

    pub fn validate(&self, half: usize) -> Result<()> {
        if self.w.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "support scales must be positive and finite, got {:?}",
                self.w
            )));
        }
        for row in &self.y {
            if row.len() != half {
                return Err(Error::InvalidArgument(format!(
                    "shape matrix rows must have {half} entries, got {}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(
                    "shape matrix entries must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Per-axis wavenumber scales `K_j = pi / w_j`.
    pub fn wavenumber_scales(&self) -> [f64; 3] {
        self.w.map(|w| std::f64::consts::PI / w)
    }
}

/// Per-axis factors `a_{j b}` of the separable coefficients, `a_beta = prod_j a_{j b_j}`.
pub fn axis_coefficients_with<Q: ShapeFactor + ?Sized>(
    y: &[Vec<f64>; 3],
    grid: &SpectralGrid,
    deltas: [f64; 3],
    shape: &Q,
) -> Result<[Vec<f64>; 3]> {
    let half = grid.half();
    for j in 0..3 {
        shape.check_delta(deltas[j])?;
        if y[j].len() != half {
            return Err(Error::InvalidArgument(format!(
                "shape matrix row {j} has {} entries, expected {half}",
                y[j].len()
            )));
        }
    }
    Ok(std::array::from_fn(|j| {
        (0..grid.nu_s())
            .map(|b| {
                let col = grid.shape_column(b);
                grid.axis_weights(j)[col].sqrt() * shape.q(y[j][col], deltas[j])
            })
            .collect()
    }))
}

/// Coefficients `a_beta(y)` over the full grid, flattened like [`SpectralGrid::chi_delta`].
pub fn a_coefficients_with<Q: ShapeFactor + ?Sized>(
    y: &[Vec<f64>; 3],
    grid: &SpectralGrid,
    deltas: [f64; 3],
    shape: &Q,
) -> Result<Vec<f64>> {
    let axis = axis_coefficients_with(y, grid, deltas, shape)?;
    let n = grid.nu_s();
    let mut a = Vec::with_capacity(grid.len());
    for b1 in 0..n {
        for b2 in 0..n {
            for b3 in 0..n {
                a.push(axis[0][b1] * axis[1][b2] * axis[2][b3]);
            }
        }
    }
    Ok(a)
}

pub fn a_coefficients(y: &[Vec<f64>; 3], grid: &SpectralGrid, deltas: [f64; 3]) -> Result<Vec<f64>> {
    a_coefficients_with(y, grid, deltas, &AffineShape)
}

/// Normalized spectral weights `chi_tilde`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights(Vec<f64>);

impl SpectralWeights {
    /// Normalizes nonnegative raw weights.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "spectral weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(Self(raw.into_iter().map(|v| v / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn chi_tilde_with<Q: ShapeFactor + ?Sized>(
    y: &[Vec<f64>; 3],
    grid: &SpectralGrid,
    deltas: [f64; 3],
    shape: &Q,
) -> Result<SpectralWeights> {
    let a = a_coefficients_with(y, grid, deltas, shape)?;
    SpectralWeights::from_raw(a.into_iter().map(|v| v * v).collect())
}

/// `chi_tilde_beta(y) = a_beta(y)^2 / sum_beta' a_beta'(y)^2` with the affine shape factor.
pub fn chi_tilde(y: &[Vec<f64>; 3], grid: &SpectralGrid, deltas: [f64; 3]) -> Result<SpectralWeights> {
    chi_tilde_with(y, grid, deltas, &AffineShape)
}

/// Law of the spectrum parameters: `W_j` uniform on `[w_min, w_max]`, independent of
/// `Y`, whose entries are iid uniform on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDistribution {
    mean_corr_length: f64,
    delta_lc: f64,
    deltas: [f64; 3],
}

impl SpectrumDistribution {
    pub fn new(mean_corr_length: f64, delta_lc: f64, deltas: [f64; 3]) -> Result<Self> {
        if !(mean_corr_length > 0.0) || !mean_corr_length.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mean correlation length must be positive, got {mean_corr_length}"
            )));
        }
        if !(0.0..MAX_SHAPE_DELTA).contains(&delta_lc) {
            return Err(Error::InvalidArgument(format!(
                "correlation length coefficient of variation must lie in [0, 1/sqrt(3)), got {delta_lc}"
            )));
        }
        for &d in &deltas {
            AffineShape.check_delta(d)?;
        }
        Ok(Self {
            mean_corr_length,
            delta_lc,
            deltas,
        })
    }

    pub fn mean_corr_length(&self) -> f64 {
        self.mean_corr_length
    }

    pub fn delta_lc(&self) -> f64 {
        self.delta_lc
    }

    pub fn deltas(&self) -> [f64; 3] {
        self.deltas
    }

    pub fn w_min(&self) -> f64 {
        self.mean_corr_length * (1.0 - 3f64.sqrt() * self.delta_lc)
    }

    pub fn w_max(&self) -> f64 {
        2.0 * self.mean_corr_length - self.w_min()
    }

    /// `delta_s^2 = prod_j (1 + delta_j^2) - 1`.
    pub fn delta_s(&self) -> f64 {
        let p: f64 = self.deltas.iter().map(|d| 1.0 + d * d).product();
        (p - 1.0).max(0.0).sqrt()
    }

    pub fn sample<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        w_rng: &mut R1,
        y_rng: &mut R2,
        nu_s: usize,
    ) -> SpectrumParams {
        let (lo, hi) = (self.w_min(), self.w_max());
        let w = std::array::from_fn(|_| {
            let u: f64 = w_rng.random();
            lo + (hi - lo) * u
        });
        let half = nu_s / 2;
        let y = std::array::from_fn(|_| (0..half).map(|_| y_rng.random::<f64>()).collect());
        SpectrumParams { w, y }
    }
}
