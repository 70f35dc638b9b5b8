//! Normalized Gaussian homogeneous field by truncated spectral representation.
//!
//! `g(x) = sum_beta sqrt(2 chi_tilde_beta) z_beta cos(phi_beta + sum_j (pi / w_j) tau_{b_j} x_j)`
//! with `z = sqrt(-ln psi)`, `psi ~ U(0, 1]` and `phi ~ U[0, 2 pi)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::rng::{amplitude_label, phase_label, substream};
use crate::spectral::{SpectralGrid, SpectralWeights, SpectrumParams};

/// Number of independent Gaussian copies driving a 6x6 symmetric matrix.
pub const N_BLOCKS: usize = 21;

/// Amplitudes and phases of one Gaussian copy.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
}

impl NoiseBlock {
    pub fn zeros(nu: usize) -> Self {
        Self {
            z: vec![0.0; nu],
            phi: vec![0.0; nu],
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn sum_sq_amplitudes(&self) -> f64 {
        self.z.iter().map(|z| z * z).sum()
    }

    /// `sqrt(2 sum z^2)`, an almost-sure bound of `|g(x)|` for normalized weights.
    pub fn amplitude_bound(&self) -> f64 {
        (2.0 * self.sum_sq_amplitudes()).sqrt()
    }
}

/// Maps a uniform draw `psi` in `(0, 1]` to the amplitude `sqrt(-ln psi)`.
pub fn amplitude_from_uniform(psi: f64) -> f64 {
    (-psi.ln()).max(0.0).sqrt()
}

/// Draws `z` from one stream and `phi` from another.
pub fn sample_noise_block<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    z_rng: &mut R1,
    phi_rng: &mut R2,
    nu: usize,
) -> NoiseBlock {
    // random::<f64>() is in [0, 1); 1 - u lies in (0, 1]
    let z = (0..nu)
        .map(|_| amplitude_from_uniform(1.0 - z_rng.random::<f64>()))
        .collect();
    let phi = (0..nu).map(|_| 2.0 * PI * phi_rng.random::<f64>()).collect();
    NoiseBlock { z, phi }
}

/// Position of block `(m, n)`, `1 <= m <= n <= 6`, in row-major upper-triangular order.
pub fn block_index(m: usize, n: usize) -> usize {
    debug_assert!(1 <= m && m <= n && n <= 6);
    let row_start: usize = (1..m).map(|r| 7 - r).sum();
    row_start + (n - m)
}

/// `(m, n)` pairs in block order.
pub fn block_pairs() -> impl Iterator<Item = (usize, usize)> {
    (1..=6).flat_map(|m| (m..=6).map(move |n| (m, n)))
}

/// The 21 germs of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    blocks: Vec<NoiseBlock>,
}

impl NoiseVector {
    pub fn new(blocks: Vec<NoiseBlock>) -> crate::Result<Self> {
        if blocks.len() != N_BLOCKS {
            return Err(crate::Error::InvalidArgument(format!(
                "a noise vector needs {N_BLOCKS} blocks, got {}",
                blocks.len()
            )));
        }
        let nu = blocks[0].len();
        if blocks.iter().any(|b| b.len() != nu || b.phi.len() != nu) {
            return Err(crate::Error::InvalidArgument(
                "noise blocks must share one length".into(),
            ));
        }
        Ok(Self { blocks })
    }

    pub fn zeros(nu: usize) -> Self {
        Self {
            blocks: vec![NoiseBlock::zeros(nu); N_BLOCKS],
        }
    }

    /// Samples every block from the substreams of realization `kappa`.
    pub fn sample(master_seed: u64, kappa: u64, nu: usize) -> Self {
        let blocks = block_pairs()
            .map(|(m, n)| {
                let mut zr = substream(master_seed, kappa, &amplitude_label(m, n));
                let mut pr = substream(master_seed, kappa, &phase_label(m, n));
                sample_noise_block(&mut zr, &mut pr, nu)
            })
            .collect();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[NoiseBlock] {
        &self.blocks
    }

    pub fn block(&self, m: usize, n: usize) -> &NoiseBlock {
        &self.blocks[block_index(m, n)]
    }

    pub fn nu(&self) -> usize {
        self.blocks[0].len()
    }

    /// Dimension of the germ, `2 * 21 * nu`.
    pub fn dimension(&self) -> usize {
        2 * N_BLOCKS * self.nu()
    }
}

fn wavenumbers(params: &SpectrumParams, grid: &SpectralGrid) -> [Vec<f64>; 3] {
    let k = params.wavenumber_scales();
    std::array::from_fn(|j| grid.tau().iter().map(|t| k[j] * t).collect())
}

/// Naive evaluation of one Gaussian copy at `x`.
pub fn eval_g(
    x: [f64; 3],
    params: &SpectrumParams,
    block: &NoiseBlock,
    weights: &SpectralWeights,
    grid: &SpectralGrid,
) -> f64 {
    let kt = wavenumbers(params, grid);
    let w = weights.as_slice();
    let mut g = 0.0;
    for flat in 0..grid.len() {
        let b = grid.multi_index(flat);
        let arg = block.phi[flat] + kt[0][b[0]] * x[0] + kt[1][b[1]] * x[1] + kt[2][b[2]] * x[2];
        g += (2.0 * w[flat]).sqrt() * block.z[flat] * arg.cos();
    }
    debug_assert!(g.abs() <= block.amplitude_bound() * (1.0 + 1e-12) + 1e-300);
    g
}

/// Closed-form correlation `rho(zeta) = sum_beta chi_tilde_beta cos(sum_j (pi/w_j) tau_{b_j} zeta_j)`.
pub fn correlation_oracle(
    zeta: [f64; 3],
    params: &SpectrumParams,
    weights: &SpectralWeights,
    grid: &SpectralGrid,
) -> f64 {
    let kt = wavenumbers(params, grid);
    let w = weights.as_slice();
    (0..grid.len())
        .map(|flat| {
            let b = grid.multi_index(flat);
            w[flat] * (kt[0][b[0]] * zeta[0] + kt[1][b[1]] * zeta[1] + kt[2][b[2]] * zeta[2]).cos()
        })
        .sum()
}

/// Evaluates Gaussian copies on a tensor grid of points `axes[0] x axes[1] x axes[2]`.
///
/// The sum factorizes over the three axes, so the per-block cost is
/// `nu_s^3 n3 + nu_s^2 n2 n3 + nu_s n1 n2 n3` complex multiply-adds instead of
/// `nu_s^3 n1 n2 n3` cosines.
#[derive(Debug, Clone)]
pub struct TensorGridSynth {
    nu_s: usize,
    dims: [usize; 3],
    // exp(i k_j tau_b x_p), stored [b][p] as (re, im)
    phases: [Vec<(f64, f64)>; 3],
    amp: Vec<f64>,
}

impl TensorGridSynth {
    pub fn new(
        axes: [&[f64]; 3],
        params: &SpectrumParams,
        weights: &SpectralWeights,
        grid: &SpectralGrid,
    ) -> Self {
        let kt = wavenumbers(params, grid);
        let nu_s = grid.nu_s();
        let dims = [axes[0].len(), axes[1].len(), axes[2].len()];
        let phases = std::array::from_fn(|j| {
            let mut v = Vec::with_capacity(nu_s * dims[j]);
            for b in 0..nu_s {
                for &x in axes[j] {
                    let (s, c) = (kt[j][b] * x).sin_cos();
                    v.push((c, s));
                }
            }
            v
        });
        let amp = weights.as_slice().iter().map(|w| (2.0 * w).sqrt()).collect();
        Self {
            nu_s,
            dims,
            phases,
            amp,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_points(&self) -> usize {
        self.dims.iter().product()
    }

    /// Values of one copy at every grid point, `p3` fastest.
    pub fn eval_block(&self, block: &NoiseBlock) -> Vec<f64> {
        let n = self.nu_s;
        let [n1, n2, n3] = self.dims;
        let coeff: Vec<(f64, f64)> = (0..n * n * n)
            .map(|f| {
                let (s, c) = block.phi[f].sin_cos();
                let a = self.amp[f] * block.z[f];
                (a * c, a * s)
            })
            .collect();
        // contract b3 against x3
        let e3 = &self.phases[2];
        let mut t1 = vec![(0.0, 0.0); n * n * n3];
        for b12 in 0..n * n {
            let out = &mut t1[b12 * n3..(b12 + 1) * n3];
            for b3 in 0..n {
                let (cr, ci) = coeff[b12 * n + b3];
                let row = &e3[b3 * n3..(b3 + 1) * n3];
                for (o, &(er, ei)) in out.iter_mut().zip(row) {
                    o.0 += cr * er - ci * ei;
                    o.1 += cr * ei + ci * er;
                }
            }
        }
        // contract b2 against x2
        let e2 = &self.phases[1];
        let mut t2 = vec![(0.0, 0.0); n * n2 * n3];
        for b1 in 0..n {
            for b2 in 0..n {
                let src = &t1[(b1 * n + b2) * n3..(b1 * n + b2 + 1) * n3];
                for p2 in 0..n2 {
                    let (er, ei) = e2[b2 * n2 + p2];
                    let out = &mut t2[(b1 * n2 + p2) * n3..(b1 * n2 + p2 + 1) * n3];
                    for (o, &(sr, si)) in out.iter_mut().zip(src) {
                        o.0 += sr * er - si * ei;
                        o.1 += sr * ei + si * er;
                    }
                }
            }
        }
        // contract b1 against x1, keep the real part
        let e1 = &self.phases[0];
        let mut g = vec![0.0; n1 * n2 * n3];
        for p1 in 0..n1 {
            let out = &mut g[p1 * n2 * n3..(p1 + 1) * n2 * n3];
            for b1 in 0..n {
                let (er, ei) = e1[b1 * n1 + p1];
                let src = &t2[b1 * n2 * n3..(b1 + 1) * n2 * n3];
                for (o, &(sr, si)) in out.iter_mut().zip(src) {
                    *o += sr * er - si * ei;
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{chi_tilde, DimensionlessSdf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(nu_s: usize) -> (SpectralGrid, SpectrumParams, SpectralWeights) {
        let grid = SpectralGrid::build(nu_s, &DimensionlessSdf::triangular()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let y: [Vec<f64>; 3] =
            std::array::from_fn(|_| (0..nu_s / 2).map(|_| r.random::<f64>()).collect());
        let params = SpectrumParams {
            w: [0.2, 0.3, 0.25],
            y,
        };
        let weights = chi_tilde(&params.y, &grid, [0.3, 0.2, 0.4]).unwrap();
        (grid, params, weights)
    }

    #[test]
    fn amplitude_inverse_map() {
        assert_eq!(amplitude_from_uniform(1.0), 0.0);
        assert!((amplitude_from_uniform((-1f64).exp()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_order_is_row_major_upper_triangular() {
        let pairs: Vec<_> = block_pairs().collect();
        assert_eq!(pairs.len(), N_BLOCKS);
        for (i, &(m, n)) in pairs.iter().enumerate() {
            assert_eq!(block_index(m, n), i);
        }
        assert_eq!(pairs[0], (1, 1));
        assert_eq!(pairs[6], (2, 2));
        assert_eq!(pairs[20], (6, 6));
    }

    #[test]
    fn zero_germ_gives_zero_field() {
        let (grid, params, weights) = setup(4);
        let block = NoiseBlock::zeros(grid.len());
        for x in [[0.0, 0.0, 0.0], [0.3, 0.7, 0.1]] {
            assert_eq!(eval_g(x, &params, &block, &weights, &grid), 0.0);
        }
    }

    #[test]
    fn single_term_is_pure_cosine() {
        let grid = SpectralGrid::build(4, &DimensionlessSdf::triangular()).unwrap();
        let target = grid.flat_index([1, 3, 2]);
        let mut raw = vec![0.0; grid.len()];
        raw[target] = 1.0;
        let weights = SpectralWeights::from_raw(raw).unwrap();
        let params = SpectrumParams::at_mean_shape([0.2, 0.5, 0.4], 2);
        let mut block = NoiseBlock::zeros(grid.len());
        block.z[target] = 1.0;
        let tau = grid.point(target);
        for x in [[0.1, 0.2, 0.3], [0.9, 0.0, 0.5]] {
            let arg: f64 = (0..3).map(|j| PI / params.w[j] * tau[j] * x[j]).sum();
            let g = eval_g(x, &params, &block, &weights, &grid);
            assert!((g - 2f64.sqrt() * arg.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn correlation_at_origin_and_evenness() {
        let (grid, params, weights) = setup(6);
        assert!((correlation_oracle([0.0; 3], &params, &weights, &grid) - 1.0).abs() < 1e-12);
        let z = [0.13, -0.4, 0.27];
        let r1 = correlation_oracle(z, &params, &weights, &grid);
        let r2 = correlation_oracle([-z[0], -z[1], -z[2]], &params, &weights, &grid);
        assert!((r1 - r2).abs() < 1e-14);
        assert!(r1.abs() <= 1.0);
    }

    #[test]
    fn amplitude_moments() {
        let mut zr = ChaCha8Rng::seed_from_u64(1);
        let mut pr = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let b = sample_noise_block(&mut zr, &mut pr, n);
        let nf = n as f64;
        let mean = b.z.iter().sum::<f64>() / nf;
        let mean2 = b.sum_sq_amplitudes() / nf;
        // Var(Z) = 1 - pi/4, Var(Z^2) = 1
        let se1 = ((1.0 - PI / 4.0) / nf).sqrt();
        let se2 = (1.0 / nf).sqrt();
        assert!((mean - PI.sqrt() / 2.0).abs() < 3.0 * se1, "{mean}");
        assert!((mean2 - 1.0).abs() < 3.0 * se2, "{mean2}");
        assert!(b.z.iter().all(|z| z.is_finite() && *z >= 0.0));
        assert!(b.phi.iter().all(|p| (0.0..=2.0 * PI).contains(p)));
    }

    #[test]
    fn field_has_unit_variance() {
        let (grid, params, weights) = setup(4);
        let mut zr = ChaCha8Rng::seed_from_u64(6);
        let mut pr = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let sq: Vec<f64> = (0..n)
            .map(|_| {
                let b = sample_noise_block(&mut zr, &mut pr, grid.len());
                eval_g([0.4, 0.1, 0.7], &params, &b, &weights, &grid).powi(2)
            })
            .collect();
        let m = sq.iter().sum::<f64>() / n as f64;
        let var = sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((m - 1.0).abs() < 3.0 * (var / n as f64).sqrt(), "{m}");
    }

    #[test]
    fn tensor_grid_matches_naive_sum() {
        let (grid, params, weights) = setup(8);
        let mut zr = ChaCha8Rng::seed_from_u64(3);
        let mut pr = ChaCha8Rng::seed_from_u64(4);
        let block = sample_noise_block(&mut zr, &mut pr, grid.len());
        let a0 = [0.0, 0.11, 0.5, 0.97];
        let a1 = [0.2, 0.8];
        let a2 = [0.05, 0.33, 0.61];
        let synth = TensorGridSynth::new([&a0, &a1, &a2], &params, &weights, &grid);
        let g = synth.eval_block(&block);
        let scale = block.amplitude_bound();
        let mut idx = 0;
        for &x0 in &a0 {
            for &x1 in &a1 {
                for &x2 in &a2 {
                    let naive = eval_g([x0, x1, x2], &params, &block, &weights, &grid);
                    assert!((g[idx] - naive).abs() <= 1e-13 * scale, "{} vs {naive}", g[idx]);
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn noise_vector_dimensions() {
        let xi = NoiseVector::sample(1, 0, 64);
        assert_eq!(xi.blocks().len(), 21);
        assert_eq!(xi.dimension(), 2 * 21 * 64);
        assert_eq!(xi, NoiseVector::sample(1, 0, 64));
        assert_ne!(xi.block(1, 1), xi.block(1, 2));
    }
}
