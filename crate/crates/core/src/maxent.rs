//! Non-Gaussian positive-definite matrix field built from 21 Gaussian copies.

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::fem::MaterialField;
use crate::gfield::{block_index, block_pairs, eval_g, NoiseVector, TensorGridSynth, N_BLOCKS};
use crate::spectral::{SpectralGrid, SpectralWeights, SpectrumParams};
use crate::{Error, Result};

/// Default lower-bound parameter.
pub const DEFAULT_EPSILON: f64 = 1e-3;

fn smallest_eigenvalue(m: &Matrix6<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Orthotropic engineering constants. Poisson ratios follow `nu_ij / E_i = nu_ji / E_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthotropicConstants {
    /// Young moduli `E1, E2, E3` (Pa).
    pub young: [f64; 3],
    pub nu23: f64,
    pub nu31: f64,
    pub nu12: f64,
    /// Shear moduli `G23, G31, G12` (Pa); estimated from the other constants when absent.
    #[serde(default)]
    pub shear: Option<[f64; 3]>,
}

impl Default for OrthotropicConstants {
    fn default() -> Self {
        Self {
            young: [1e10, 0.5e10, 0.1e10],
            nu23: 0.25,
            nu31: 0.15,
            nu12: 0.1,
            shear: None,
        }
    }
}

impl OrthotropicConstants {
    /// `G_ij = E_i E_j / (E_i + E_j + 2 nu_ij E_j)`.
    pub fn default_shear(&self) -> [f64; 3] {
        let [e1, e2, e3] = self.young;
        [
            e2 * e3 / (e2 + e3 + 2.0 * self.nu23 * e3),
            e3 * e1 / (e3 + e1 + 2.0 * self.nu31 * e1),
            e1 * e2 / (e1 + e2 + 2.0 * self.nu12 * e2),
        ]
    }

    pub fn shear_moduli(&self) -> [f64; 3] {
        self.shear.unwrap_or_else(|| self.default_shear())
    }

    pub fn compliance(&self) -> Matrix6<f64> {
        let [e1, e2, e3] = self.young;
        let [g23, g31, g12] = self.shear_moduli();
        let s12 = -self.nu12 / e1;
        let s23 = -self.nu23 / e2;
        let s13 = -self.nu31 / e3;
        let mut s = Matrix6::zeros();
        s[(0, 0)] = 1.0 / e1;
        s[(1, 1)] = 1.0 / e2;
        s[(2, 2)] = 1.0 / e3;
        s[(0, 1)] = s12;
        s[(1, 0)] = s12;
        s[(1, 2)] = s23;
        s[(2, 1)] = s23;
        s[(0, 2)] = s13;
        s[(2, 0)] = s13;
        s[(3, 3)] = 1.0 / g23;
        s[(4, 4)] = 1.0 / g31;
        s[(5, 5)] = 1.0 / g12;
        s
    }
}

/// Mean elasticity `C_bar = L_bar^T L_bar` with its coercivity and trace constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanElasticity {
    c_bar: Matrix6<f64>,
    l_bar: Matrix6<f64>,
    c0: f64,
    c1: f64,
}

impl MeanElasticity {
    pub fn from_matrix(c_bar: Matrix6<f64>) -> Result<Self> {
        if c_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::InadmissibleConstants("non-finite entries".into()));
        }
        let asym = (c_bar - c_bar.transpose()).norm();
        if asym > 1e-12 * c_bar.norm() {
            return Err(Error::InadmissibleConstants(format!(
                "matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        let c_bar = 0.5 * (c_bar + c_bar.transpose());
        let c0 = smallest_eigenvalue(&c_bar);
        if !(c0 > 0.0) {
            return Err(Error::InadmissibleConstants(format!(
                "matrix is not positive definite (smallest eigenvalue {c0:e})"
            )));
        }
        let chol = c_bar.cholesky().ok_or_else(|| {
            Error::InadmissibleConstants("Cholesky factorization failed".into())
        })?;
        let l_bar = chol.l().transpose();
        Ok(Self {
            c_bar,
            l_bar,
            c0,
            c1: c_bar.trace(),
        })
    }

    pub fn orthotropic(k: &OrthotropicConstants) -> Result<Self> {
        let shear = k.shear_moduli();
        if k.young.iter().chain(shear.iter()).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InadmissibleConstants(
                "Young and shear moduli must be positive and finite".into(),
            ));
        }
        let s = k.compliance();
        let ls = smallest_eigenvalue(&s);
        if !(ls > 0.0) {
            return Err(Error::InadmissibleConstants(format!(
                "compliance is not positive definite (smallest eigenvalue {ls:e})"
            )));
        }
        let c = s
            .try_inverse()
            .ok_or_else(|| Error::InadmissibleConstants("singular compliance".into()))?;
        Self::from_matrix(0.5 * (c + c.transpose()))
    }

    pub fn c_bar(&self) -> &Matrix6<f64> {
        &self.c_bar
    }

    /// Upper-triangular factor.
    pub fn l_bar(&self) -> &Matrix6<f64> {
        &self.l_bar
    }

    /// Smallest eigenvalue of `C_bar`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Trace of `C_bar`.
    pub fn c1(&self) -> f64 {
        self.c1
    }
}

/// Upper end of the admissible dispersion range, `sqrt(7/11)`.
pub fn max_delta_c() -> f64 {
    (7.0f64 / 11.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixFieldParams {
    delta_c: f64,
    epsilon: f64,
    sigma_c: f64,
    alpha: [f64; 6],
}

impl MatrixFieldParams {
    pub fn new(delta_c: f64, epsilon: f64) -> Result<Self> {
        if !(delta_c > 0.0 && delta_c < max_delta_c()) {
            return Err(Error::InvalidArgument(format!(
                "dispersion must lie in (0, sqrt(7/11)), got {delta_c}"
            )));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lower-bound parameter must be positive, got {epsilon}"
            )));
        }
        let sigma_c = delta_c / 7f64.sqrt();
        let alpha = std::array::from_fn(|i| 1.0 / (2.0 * sigma_c * sigma_c) - i as f64 / 2.0);
        Ok(Self {
            delta_c,
            epsilon,
            sigma_c,
            alpha,
        })
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    /// Gamma shape parameters `alpha_1 .. alpha_6`.
    pub fn alpha(&self) -> [f64; 6] {
        self.alpha
    }

    /// Coercivity constant `c0 eps / (1 + eps)` of the elasticity field.
    pub fn c_epsilon(&self, mean: &MeanElasticity) -> f64 {
        mean.c0() * self.epsilon / (1.0 + self.epsilon)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(b: f64) -> f64 {
    0.5 * erfc(-b / std::f64::consts::SQRT_2)
}

/// `log Phi(-|b|)` for `|b|` beyond the range where the tail probability is representable.
fn ln_normal_tail(b: f64) -> f64 {
    let a = b.abs();
    -0.5 * a * a - a.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (-1.0 / (a * a)).ln_1p()
}

const H_MAX_ITER: usize = 200;
const H_RESIDUAL_CEILING: f64 = 1e-8;

/// `h(b; alpha) = F_alpha^{-1}(Phi(b))` with `F_alpha` the Gamma(alpha, 1) CDF.
pub fn h_transform(b: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 3.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gamma shape must exceed 3, got {alpha}"
        )));
    }
    if !b.is_finite() {
        return Err(Error::InvalidArgument(format!("h-transform argument must be finite, got {b}")));
    }
    let lg = ln_gamma(alpha);
    let upper = b > 0.0;
    // the smaller of Phi(b) and 1 - Phi(b), computed without cancellation
    let tail = 0.5 * erfc(b.abs() / std::f64::consts::SQRT_2);
    if tail < f64::MIN_POSITIVE {
        return Ok(h_far_tail(b, alpha, lg));
    }

    let pdf = |g: f64| ((alpha - 1.0) * g.ln() - g - lg).exp();
    // increasing residual in the unknown
    let resid = |g: f64| {
        if upper {
            tail - gamma_ur(alpha, g)
        } else {
            gamma_lr(alpha, g) - tail
        }
    };

    let c = 1.0 / (9.0 * alpha);
    let wh = alpha * (1.0 - c + b * c.sqrt()).powi(3);
    let mut g = if wh > 0.0 {
        wh
    } else {
        ((tail.ln() + ln_gamma(alpha + 1.0)) / alpha).exp()
    };
    if !(g > 0.0) || !g.is_finite() {
        g = alpha;
    }

    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let tol = 1e-13 * tail;
    let mut r = resid(g);
    for it in 0..H_MAX_ITER {
        if r.abs() <= tol {
            return Ok(g);
        }
        if r < 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        let d = pdf(g);
        let mut next = g - r / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * g.max(lo) };
        }
        if (next - g).abs() <= 1e-12 * g
            || (hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi)
        {
            // converged in the argument; the residual then only reflects evaluation noise
            let rn = resid(next);
            if rn.abs() <= H_RESIDUAL_CEILING {
                return Ok(next);
            }
            return Err(Error::HTransformNonConvergence {
                b,
                alpha,
                residual: rn,
                iterations: it + 1,
            });
        }
        g = next;
        r = resid(g);
    }
    Err(Error::HTransformNonConvergence {
        b,
        alpha,
        residual: r,
        iterations: H_MAX_ITER,
    })
}

/// Asymptotic inversion when the normal tail underflows.
fn h_far_tail(b: f64, alpha: f64, lg: f64) -> f64 {
    let lt = ln_normal_tail(b);
    if b < 0.0 {
        // P(alpha, g) ~ g^alpha / Gamma(alpha + 1)
        ((lt + ln_gamma(alpha + 1.0)) / alpha).exp()
    } else {
        // Q(alpha, g) ~ g^(alpha - 1) e^-g / Gamma(alpha), decreasing for g > alpha - 1
        let mut g = -lt + alpha;
        for _ in 0..100 {
            let f = (alpha - 1.0) * g.ln() - g - lg - lt;
            let step = f / ((alpha - 1.0) / g - 1.0);
            g -= step;
            if step.abs() <= 1e-15 * g {
                break;
            }
        }
        g
    }
}

/// `C = L^T L` from the 21 Gaussian values in block order.
pub fn c_from_gaussians(g: &[f64; N_BLOCKS], mfp: &MatrixFieldParams) -> Result<Matrix6<f64>> {
    let s = mfp.sigma_c();
    let alpha = mfp.alpha();
    let mut l = Matrix6::zeros();
    for (k, (m, n)) in block_pairs().enumerate() {
        l[(m - 1, n - 1)] = if m == n {
            s * (2.0 * h_transform(g[k], alpha[m - 1])?).sqrt()
        } else {
            s * g[k]
        };
    }
    Ok(l.transpose() * l)
}

/// `(1 + eps)^-1 L_bar^T (eps I + C) L_bar`.
pub fn elasticity_from_c(
    c: &Matrix6<f64>,
    mfp: &MatrixFieldParams,
    mean: &MeanElasticity,
) -> Matrix6<f64> {
    let eps = mfp.epsilon();
    let lb = mean.l_bar();
    let inner = c + Matrix6::identity() * eps;
    let out = lb.transpose() * inner * lb / (1.0 + eps);
    0.5 * (out + out.transpose())
}

fn gaussians_at(
    x: [f64; 3],
    params: &SpectrumParams,
    xi: &NoiseVector,
    weights: &SpectralWeights,
    grid: &SpectralGrid,
) -> [f64; N_BLOCKS] {
    std::array::from_fn(|k| eval_g(x, params, &xi.blocks()[k], weights, grid))
}

/// Normalized matrix field `[C(x)]`.
pub fn eval_c(
    x: [f64; 3],
    params: &SpectrumParams,
    xi: &NoiseVector,
    mfp: &MatrixFieldParams,
    weights: &SpectralWeights,
    grid: &SpectralGrid,
) -> Result<Matrix6<f64>> {
    c_from_gaussians(&gaussians_at(x, params, xi, weights, grid), mfp)
}

/// Elasticity field `[C_elast(x)]` (Pa).
pub fn eval_elasticity(
    x: [f64; 3],
    params: &SpectrumParams,
    xi: &NoiseVector,
    mfp: &MatrixFieldParams,
    mean: &MeanElasticity,
    weights: &SpectralWeights,
    grid: &SpectralGrid,
) -> Result<Matrix6<f64>> {
    let c = eval_c(x, params, xi, mfp, weights, grid)?;
    Ok(elasticity_from_c(&c, mfp, mean))
}

/// Almost-sure Frobenius bounds of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Bound of `||C(x)||_F`.
    pub gamma_c: f64,
    /// Bound of `||C_elast(x)||_F`.
    pub gamma_elast: f64,
}

pub fn gamma_certificate(
    xi: &NoiseVector,
    mfp: &MatrixFieldParams,
    mean: &MeanElasticity,
) -> Certificate {
    let s2 = mfp.sigma_c().powi(2);
    let sum_alpha: f64 = mfp.alpha().iter().sum();
    let mut diag = 0.0;
    let mut off = 0.0;
    for (m, n) in block_pairs() {
        let zz = xi.blocks()[block_index(m, n)].sum_sq_amplitudes();
        if m == n {
            diag += zz;
        } else {
            off += zz;
        }
    }
    let gamma_c = s2 * (4.0 * sum_alpha + 4.0 * diag + 2.0 * off);
    let eps = mfp.epsilon();
    let gamma_elast = mean.c1() / (1.0 + eps) * (eps * 6f64.sqrt() + gamma_c);
    Certificate {
        gamma_c,
        gamma_elast,
    }
}

/// One realization of the elasticity field, ready for evaluation.
#[derive(Debug, Clone)]
pub struct ElasticityField {
    pub params: SpectrumParams,
    pub noise: NoiseVector,
    pub weights: SpectralWeights,
    pub grid: SpectralGrid,
    pub mfp: MatrixFieldParams,
    pub mean: MeanElasticity,
}

impl ElasticityField {
    pub fn certificate(&self) -> Certificate {
        gamma_certificate(&self.noise, &self.mfp, &self.mean)
    }

    pub fn eval_c(&self, x: [f64; 3]) -> Result<Matrix6<f64>> {
        eval_c(x, &self.params, &self.noise, &self.mfp, &self.weights, &self.grid)
    }
}

impl MaterialField for ElasticityField {
    fn eval(&self, x: [f64; 3]) -> Result<Matrix6<f64>> {
        let c = self.eval_c(x)?;
        Ok(elasticity_from_c(&c, &self.mfp, &self.mean))
    }

    fn eval_tensor_grid(&self, axes: [&[f64]; 3]) -> Result<Vec<Matrix6<f64>>> {
        let synth = TensorGridSynth::new(axes, &self.params, &self.weights, &self.grid);
        let values: Vec<Vec<f64>> = self
            .noise
            .blocks()
            .iter()
            .map(|b| synth.eval_block(b))
            .collect();
        (0..synth.n_points())
            .map(|p| {
                let g = std::array::from_fn(|k| values[k][p]);
                let c = c_from_gaussians(&g, &self.mfp)?;
                Ok(elasticity_from_c(&c, &self.mfp, &self.mean))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfield::NoiseBlock;
    use crate::spectral::{chi_tilde, DimensionlessSdf};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rel(a: &Matrix6<f64>, b: &Matrix6<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn gamma_quantile_bisect(p: f64, alpha: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 10.0 * alpha + 100.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if gamma_lr(alpha, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn isotropic_limit() {
        let (e, nu) = (2.0e9, 0.3);
        let g = e / (2.0 * (1.0 + nu));
        let k = OrthotropicConstants {
            young: [e; 3],
            nu23: nu,
            nu31: nu,
            nu12: nu,
            shear: Some([g; 3]),
        };
        let m = MeanElasticity::orthotropic(&k).unwrap();
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mut c = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = if i == j { lam + 2.0 * g } else { lam };
            }
            c[(i + 3, i + 3)] = g;
        }
        assert!(rel(m.c_bar(), &c) < 1e-10);
    }

    #[test]
    fn default_mean_model() {
        let k = OrthotropicConstants::default();
        let m = MeanElasticity::orthotropic(&k).unwrap();
        assert!(m.c0() > 0.0);
        let back = m.c_bar().try_inverse().unwrap();
        assert!((1.0 / back[(0, 0)] - 1e10).abs() < 1e-10 * 1e10);
        assert!((1.0 / back[(2, 2)] - 0.1e10).abs() < 1e-10 * 0.1e10);
        let lb = m.l_bar();
        for i in 0..6 {
            for j in 0..i {
                assert_eq!(lb[(i, j)], 0.0);
            }
        }
        assert!(rel(&(lb.transpose() * lb), m.c_bar()) < 1e-12);
        let [g23, g31, g12] = k.default_shear();
        assert!((g23 - 0.5e10 * 0.1e10 / (0.6e10 + 0.5e9)).abs() < 1.0);
        assert!((g31 - 0.1e10 * 1e10 / (1.1e10 + 0.3e10)).abs() < 1.0);
        assert!((g12 - 1e10 * 0.5e10 / (1.5e10 + 0.1e10)).abs() < 1.0);
        assert!(m.c1() > 0.0);
    }

    #[test]
    fn coercivity_on_random_directions() {
        let m = MeanElasticity::orthotropic(&OrthotropicConstants::default()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let w = nalgebra::Vector6::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
            let q = (m.c_bar() * w).dot(&w);
            assert!(q >= m.c0() * w.norm_squared() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn inadmissible_constants_rejected() {
        let k = OrthotropicConstants {
            young: [1.0, 1.0, 1.0],
            nu23: 0.9,
            nu31: 0.9,
            nu12: 0.9,
            shear: Some([1.0; 3]),
        };
        assert!(matches!(
            MeanElasticity::orthotropic(&k),
            Err(Error::InadmissibleConstants(_))
        ));
    }

    #[test]
    fn alpha_values() {
        let p = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let a = p.alpha();
        assert!((a[0] - 21.875).abs() < 1e-12);
        assert!((a[5] - 19.375).abs() < 1e-12);
        assert!(a.windows(2).all(|w| w[0] > w[1]) && a[5] > 3.0);
        assert!(MatrixFieldParams::new(0.8, 1e-3).is_err());
        assert!(MatrixFieldParams::new(0.0, 1e-3).is_err());
        assert!(MatrixFieldParams::new(0.4, 0.0).is_err());
    }

    #[test]
    fn h_median() {
        let oracle = gamma_quantile_bisect(0.5, 10.0);
        let h = h_transform(0.0, 10.0).unwrap();
        assert!((h - oracle).abs() < 1e-9, "{h} vs {oracle}");
        assert!((h - 9.6687).abs() < 1e-4);
    }

    #[test]
    fn h_inverse_consistency_and_tails() {
        for &alpha in &[3.5, 5.0, 19.375, 21.875, 50.0, 500.0] {
            for &b in &[-8.0, -5.0, -1.3, -1e-8, 0.0, 0.7, 3.0, 6.5, 9.0] {
                let h = h_transform(b, alpha).unwrap();
                let err = if b > 0.0 {
                    (gamma_ur(alpha, h) - 0.5 * erfc(b / std::f64::consts::SQRT_2)).abs()
                } else {
                    (gamma_lr(alpha, h) - normal_cdf(b)).abs()
                };
                assert!(err < 1e-12, "alpha {alpha} b {b} err {err}");
                assert!(h <= 2.0 * alpha + b * b);
            }
        }
        let far_lo = h_transform(-45.0, 20.0).unwrap();
        let far_hi = h_transform(45.0, 20.0).unwrap();
        assert!(far_lo > 0.0 && far_lo < h_transform(-8.0, 20.0).unwrap());
        assert!(far_hi > h_transform(9.0, 20.0).unwrap() && far_hi <= 40.0 + 45.0 * 45.0);
    }

    #[test]
    fn h_large_shape() {
        for &(alpha, tol) in &[(3.5e4, 1e-10), (1e6, 1e-8)] {
            let mut prev = 0.0;
            for i in 0..81 {
                let b = -4.0 + 0.1 * i as f64;
                let h = h_transform(b, alpha).unwrap();
                let e = (gamma_lr(alpha, h) - normal_cdf(b)).abs();
                assert!(e < tol, "alpha {alpha} b {b} err {e}");
                assert!((h - alpha - b * alpha.sqrt()).abs() < 0.01 * alpha.sqrt() * (1.0 + b * b));
                assert!(h > prev);
                prev = h;
            }
        }
    }

    #[test]
    fn h_rejects_small_alpha() {
        assert!(matches!(h_transform(0.0, 3.0), Err(Error::InvalidArgument(_))));
        assert!(h_transform(f64::NAN, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn h_bound_and_monotone(b in -9.0f64..9.0, db in 1e-6f64..1.0, alpha in 3.0001f64..50.0) {
            let h0 = h_transform(b, alpha).unwrap();
            let h1 = h_transform(b + db, alpha).unwrap();
            prop_assert!(h0 > 0.0);
            prop_assert!(h0 <= 2.0 * alpha + b * b);
            prop_assert!(h1 > h0);
        }
    }

    #[test]
    fn zero_germ_gives_diagonal_matrix() {
        let grid = SpectralGrid::build(4, &DimensionlessSdf::triangular()).unwrap();
        let params = SpectrumParams::at_mean_shape([0.2; 3], 2);
        let weights = chi_tilde(&params.y, &grid, [0.0; 3]).unwrap();
        let xi = NoiseVector::zeros(grid.len());
        let mfp = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let c = eval_c([0.3, 0.1, 0.9], &params, &xi, &mfp, &weights, &grid).unwrap();
        let s2 = mfp.sigma_c().powi(2);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j {
                    2.0 * s2 * h_transform(0.0, mfp.alpha()[i]).unwrap()
                } else {
                    0.0
                };
                assert!((c[(i, j)] - want).abs() < 1e-14);
            }
        }
        let cert = gamma_certificate(&xi, &mfp, &MeanElasticity::orthotropic(&Default::default()).unwrap());
        assert!((cert.gamma_c - 4.0 * 0.16 / 7.0 * 123.75).abs() < 1e-12);
        assert!((cert.gamma_c - 11.314).abs() < 1e-3);
    }

    #[test]
    fn identity_c_gives_mean() {
        let mean = MeanElasticity::orthotropic(&OrthotropicConstants::default()).unwrap();
        let mfp = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let e = elasticity_from_c(&Matrix6::identity(), &mfp, &mean);
        assert!(rel(&e, mean.c_bar()) < 1e-14);
    }

    fn random_field(seed: u64, nu_s: usize) -> ElasticityField {
        let grid = SpectralGrid::build(nu_s, &DimensionlessSdf::triangular()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let y: [Vec<f64>; 3] = std::array::from_fn(|_| (0..nu_s / 2).map(|_| r.random()).collect());
        let params = SpectrumParams { w: [0.15, 0.25, 0.2], y };
        let weights = chi_tilde(&params.y, &grid, [0.3; 3]).unwrap();
        ElasticityField {
            noise: NoiseVector::sample(seed, 0, grid.len()),
            params,
            weights,
            grid,
            mfp: MatrixFieldParams::new(0.4, 1e-3).unwrap(),
            mean: MeanElasticity::orthotropic(&OrthotropicConstants::default()).unwrap(),
        }
    }

    #[test]
    fn coercive_and_bounded_pointwise() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            let f = random_field(seed, 4);
            let cert = f.certificate();
            let ce = f.mfp.c_epsilon(&f.mean);
            for _ in 0..50 {
                let x = [r.random(), r.random(), r.random()];
                let c = f.eval_c(x).unwrap();
                assert!(smallest_eigenvalue(&c) > 0.0);
                assert!(c.norm() <= cert.gamma_c);
                let e = f.eval(x).unwrap();
                assert!(smallest_eigenvalue(&e) >= ce * (1.0 - 1e-10));
                assert!(e.norm() <= cert.gamma_elast);
            }
        }
    }

    #[test]
    fn tensor_grid_matches_pointwise() {
        let f = random_field(11, 4);
        let a = [0.1, 0.4];
        let b = [0.25, 0.5, 0.75];
        let c = [0.9];
        let vals = f.eval_tensor_grid([&a, &b, &c]).unwrap();
        let mut k = 0;
        for &x in &a {
            for &y in &b {
                for &z in &c {
                    assert!(rel(&vals[k], &f.eval([x, y, z]).unwrap()) < 1e-12);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn certificate_mean() {
        let mfp = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let mean = MeanElasticity::orthotropic(&Default::default()).unwrap();
        let nu = 8;
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|k| gamma_certificate(&NoiseVector::sample(77, k, nu), &mfp, &mean).gamma_c)
            .collect();
        let m = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let s2 = mfp.sigma_c().powi(2);
        let want = s2 * (4.0 * mfp.alpha().iter().sum::<f64>() + 54.0 * nu as f64);
        assert!((m - want).abs() < 3.0 * (var / n as f64).sqrt(), "{m} vs {want}");
    }

    #[test]
    fn h_of_uniform_input_keeps_the_mean() {
        let mfp = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 200_000;
        for alpha in mfp.alpha() {
            let m = (0..n)
                .map(|_| h_transform(12f64.sqrt() * (rng.random::<f64>() - 0.5), alpha).unwrap())
                .sum::<f64>()
                / n as f64;
            assert!((m - alpha).abs() / alpha < 5e-3, "{alpha}: {m}");
        }
    }

    #[test]
    fn elasticity_mean_is_the_mean_model() {
        let grid = SpectralGrid::build(4, &DimensionlessSdf::triangular()).unwrap();
        let params = SpectrumParams::at_mean_shape([0.2, 0.3, 0.25], 2);
        let weights = chi_tilde(&params.y, &grid, [0.0; 3]).unwrap();
        let mfp = MatrixFieldParams::new(0.4, 1e-3).unwrap();
        let mean = MeanElasticity::orthotropic(&Default::default()).unwrap();
        let n = 10_000;
        let s: Vec<Matrix6<f64>> = (0..n)
            .map(|k| {
                let xi = NoiseVector::sample(21, k, grid.len());
                eval_elasticity([0.5, 0.2, 0.9], &params, &xi, &mfp, &mean, &weights, &grid).unwrap()
            })
            .collect();
        let nf = n as f64;
        let m = s.iter().fold(Matrix6::zeros(), |a, c| a + c) / nf;
        for i in 0..6 {
            for j in 0..6 {
                let var = s.iter().map(|c| (c[(i, j)] - m[(i, j)]).powi(2)).sum::<f64>() / (nf - 1.0);
                let dev = (m[(i, j)] - mean.c_bar()[(i, j)]).abs();
                assert!(dev <= 4.0 * (var / nf).sqrt() + 1e-9 * mean.c1(), "({i},{j}) {dev}");
            }
        }
    }
}
