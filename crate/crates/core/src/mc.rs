//! Monte Carlo campaign over spectrum parameters and germs, and its statistics.

use rayon::prelude::*;

use crate::config::{Config, Derived};
use crate::fem::{homogenize, EffectiveSample, HexMesh, SolverOptions};
use crate::gfield::NoiseVector;
use crate::maxent::{ElasticityField, MatrixFieldParams, MeanElasticity};
use crate::rng::{substream, LABEL_W, LABEL_Y};
use crate::spectral::{chi_tilde, SpectralGrid, SpectrumDistribution};
use crate::{Error, Result};

/// Everything needed to run realization `kappa` of a campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub seed: u64,
    pub kappa_sim: usize,
    pub grid: SpectralGrid,
    pub dist: SpectrumDistribution,
    pub mfp: MatrixFieldParams,
    pub mean: MeanElasticity,
    pub mesh: HexMesh,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kappa: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    /// Successful realizations in index order.
    pub records: Vec<EffectiveSample>,
    pub failures: Vec<Failure>,
}

impl Campaign {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let Derived {
            grid,
            dist,
            mfp,
            mean,
            mesh,
            solver,
        } = cfg.derive()?;
        Ok(Self {
            seed: cfg.seed,
            kappa_sim: cfg.kappa,
            grid,
            dist,
            mfp,
            mean,
            mesh,
            solver,
        })
    }

    /// Draws the spectrum parameters, then the germ, of realization `kappa`.
    pub fn field(&self, kappa: u64) -> Result<ElasticityField> {
        let mut w_rng = substream(self.seed, kappa, LABEL_W);
        let mut y_rng = substream(self.seed, kappa, LABEL_Y);
        let params = self.dist.sample(&mut w_rng, &mut y_rng, self.grid.nu_s());
        let weights = chi_tilde(&params.y, &self.grid, self.dist.deltas())?;
        Ok(ElasticityField {
            noise: NoiseVector::sample(self.seed, kappa, self.grid.len()),
            params,
            weights,
            grid: self.grid.clone(),
            mfp: self.mfp,
            mean: self.mean.clone(),
        })
    }

    pub fn realization(&self, kappa: u64) -> Result<EffectiveSample> {
        let field = self.field(kappa)?;
        let (mut eff, _, _) = homogenize(&self.mesh, &field, &self.solver)?;
        eff.kappa = kappa;
        Ok(eff)
    }

    /// Runs every realization on the current rayon pool.
    pub fn run(&self) -> CampaignOutput {
        let results: Vec<(u64, Result<EffectiveSample>)> = (0..self.kappa_sim as u64)
            .into_par_iter()
            .map(|k| (k, self.realization(k)))
            .collect();
        let mut records = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (kappa, r) in results {
            match r {
                Ok(s) => records.push(s),
                Err(e) => {
                    log::warn!("realization {kappa} failed: {e}");
                    failures.push(Failure {
                        kappa,
                        reason: e.to_string(),
                    });
                }
            }
        }
        if failures.len() * 100 > self.kappa_sim {
            log::warn!(
                "{} of {} realizations failed; statistics use {} samples",
                failures.len(),
                self.kappa_sim,
                records.len()
            );
        }
        CampaignOutput { records, failures }
    }

    /// Runs on a dedicated pool of `threads` workers.
    pub fn run_with_threads(&self, threads: Option<usize>) -> Result<CampaignOutput> {
        match threads {
            None => Ok(self.run()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
                Ok(pool.install(|| self.run()))
            }
        }
    }
}

/// `conv(k) = ||C_bar||_F^-1 (k^-1 sum_{kappa <= k} ||lambda^kappa||^2)^(1/2)` for every prefix.
pub fn convergence(records: &[EffectiveSample], c_bar_norm: f64) -> Vec<f64> {
    let mut acc = 0.0;
    records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            acc += r.lambda.iter().map(|l| l * l).sum::<f64>();
            (acc / (k + 1) as f64).sqrt() / c_bar_norm
        })
        .collect()
}

/// Mean of the largest eigenvalue and the normalized samples `lambda1 / mean`.
pub fn normalized_norm_stats(records: &[EffectiveSample]) -> Result<(f64, Vec<f64>)> {
    if records.len() < 2 {
        return Err(Error::DegenerateSamples(format!(
            "need at least 2 records, got {}",
            records.len()
        )));
    }
    let mean = records.iter().map(|r| r.lambda[0]).sum::<f64>() / records.len() as f64;
    Ok((mean, records.iter().map(|r| r.lambda[0] / mean).collect()))
}

/// Empirical probability of `(1 - eta, 1 + eta]`.
pub fn prob_band(samples: &[f64], eta: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let hits = samples
        .iter()
        .filter(|&&s| s > 1.0 - eta && s <= 1.0 + eta)
        .count();
    hits as f64 / samples.len() as f64
}

/// Empirical CDF `#{s <= t} / n`.
pub fn ecdf(samples: &[f64], t: f64) -> f64 {
    samples.iter().filter(|&&s| s <= t).count() as f64 / samples.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman bandwidth `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateSamples("bandwidth needs at least 2 samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSamples("samples have zero variance".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Minimum sample count for a density estimate.
pub const KDE_MIN_SAMPLES: usize = 10;

/// Gaussian-kernel density on `points` equally spaced values over `[min - 3h, max + 3h]`.
pub fn kde_pdf(samples: &[f64], points: usize) -> Result<Kde> {
    if samples.len() < KDE_MIN_SAMPLES {
        return Err(Error::DegenerateSamples(format!(
            "density estimate needs at least {KDE_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let h = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    Ok(Kde {
        bandwidth: h,
        density: kde_eval(samples, h, &grid),
        grid,
    })
}

pub fn kde_eval(samples: &[f64], h: f64, at: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    at.iter()
        .map(|&t| {
            norm * samples
                .iter()
                .map(|&s| (-0.5 * ((t - s) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Statistics of one campaign.
#[derive(Debug, Clone)]
pub struct CampaignStats {
    pub conv: Vec<f64>,
    pub mean_lambda1: f64,
    pub lambda1_normalized: Vec<f64>,
    pub pdf: Option<Kde>,
    pub p_eta: Vec<(f64, f64)>,
}

pub fn campaign_stats(
    records: &[EffectiveSample],
    mean: &MeanElasticity,
    eta: &[f64],
    kde_points: usize,
) -> Result<CampaignStats> {
    let conv = convergence(records, mean.c_bar().norm());
    let (mean_lambda1, lambda1_normalized) = normalized_norm_stats(records)?;
    let pdf = match kde_pdf(&lambda1_normalized, kde_points) {
        Ok(k) => Some(k),
        Err(e) => {
            log::warn!("density estimate skipped: {e}");
            None
        }
    };
    let p_eta = eta
        .iter()
        .map(|&e| (e, prob_band(&lambda1_normalized, e)))
        .collect();
    Ok(CampaignStats {
        conv,
        mean_lambda1,
        lambda1_normalized,
        pdf,
        p_eta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendVerdict {
    Confirmed,
    Contradicted,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendCheck {
    pub diff: f64,
    pub std_err: f64,
    pub verdict: TrendVerdict,
}

impl TrendCheck {
    pub fn passes(&self) -> bool {
        self.verdict != TrendVerdict::Contradicted
    }
}

/// Tests the expectation `p_a > p_b` with a pooled two-proportion standard error; the
/// trend is asserted only when the gap exceeds two standard errors.
pub fn two_proportion_trend(p_a: f64, n_a: usize, p_b: f64, n_b: usize) -> TrendCheck {
    let (na, nb) = (n_a as f64, n_b as f64);
    let pooled = (p_a * na + p_b * nb) / (na + nb);
    let std_err = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let diff = p_a - p_b;
    let verdict = if diff.abs() > 2.0 * std_err {
        if diff > 0.0 {
            TrendVerdict::Confirmed
        } else {
            TrendVerdict::Contradicted
        }
    } else {
        TrendVerdict::Inconclusive
    };
    if verdict == TrendVerdict::Inconclusive {
        log::warn!("trend inconclusive: difference {diff:.4} within 2 standard errors ({std_err:.4})");
    }
    TrendCheck {
        diff,
        std_err,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix6;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn record(l: [f64; 6]) -> EffectiveSample {
        EffectiveSample {
            kappa: 0,
            c_eff: Matrix6::from_diagonal(&l.into()),
            lambda: l,
            raw_asymmetry: 0.0,
        }
    }

    #[test]
    fn conv_homogeneous_limit() {
        let m = MeanElasticity::orthotropic(&Default::default()).unwrap();
        let l = crate::fem::sorted_eigenvalues(m.c_bar());
        let c = convergence(&[record(l)], m.c_bar().norm());
        assert!((c[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conv_prefix_property() {
        let recs: Vec<_> = (1..=10).map(|k| record([k as f64, 1.0, 1.0, 1.0, 1.0, 1.0])).collect();
        let full = convergence(&recs, 2.0);
        for k in 1..=10 {
            assert_eq!(convergence(&recs[..k], 2.0), full[..k]);
        }
    }

    #[test]
    fn normalized_stats() {
        let recs: Vec<_> = (0..5).map(|_| record([3.0, 1.0, 1.0, 1.0, 1.0, 1.0])).collect();
        let (m, s) = normalized_norm_stats(&recs).unwrap();
        assert_eq!(m, 3.0);
        assert!(s.iter().all(|v| *v == 1.0));
        let recs: Vec<_> = (0..7).map(|k| record([1.0 + k as f64 * 0.37, 1.0, 1.0, 1.0, 1.0, 1.0])).collect();
        let (_, s) = normalized_norm_stats(&recs).unwrap();
        assert!((s.iter().sum::<f64>() / s.len() as f64 - 1.0).abs() < 1e-14);
        assert!(normalized_norm_stats(&recs[..1]).is_err());
    }

    #[test]
    fn kde_standard_normal() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let k = kde_pdf(&s, 512).unwrap();
        let at0 = kde_eval(&s, k.bandwidth, &[0.0])[0];
        let exact = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((at0 - exact).abs() < 0.1 * exact);
        assert!(k.density.iter().all(|d| *d >= 0.0));
        assert!((trapezoid(&k.grid, &k.density) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_rejects_degenerate() {
        assert!(kde_pdf(&[1.0; 20], 64).is_err());
        assert!(kde_pdf(&[1.0, 2.0], 64).is_err());
    }

    #[test]
    fn band_counts() {
        let s = [0.5, 0.9, 1.0, 1.05, 1.1, 1.9, 2.0];
        assert_eq!(prob_band(&s, 1.0), 1.0);
        assert_eq!(prob_band(&s, 0.1), 3.0 / 7.0);
    }

    proptest! {
        #[test]
        fn band_is_ecdf_difference_and_monotone(
            s in proptest::collection::vec(0.0f64..2.0, 1..200),
            e1 in 0.001f64..1.0,
            e2 in 0.001f64..1.0,
        ) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(prob_band(&s, lo) <= prob_band(&s, hi));
            let p = prob_band(&s, lo);
            let d = ecdf(&s, 1.0 + lo) - ecdf(&s, 1.0 - lo);
            prop_assert!((p - d).abs() <= 1e-15);
        }
    }

    #[test]
    fn trend_guard() {
        assert_eq!(two_proportion_trend(0.9, 200, 0.6, 200).verdict, TrendVerdict::Confirmed);
        assert_eq!(two_proportion_trend(0.6, 200, 0.9, 200).verdict, TrendVerdict::Contradicted);
        assert_eq!(two_proportion_trend(0.61, 200, 0.6, 200).verdict, TrendVerdict::Inconclusive);
        assert_eq!(two_proportion_trend(1.0, 200, 1.0, 200).verdict, TrendVerdict::Inconclusive);
        assert!(two_proportion_trend(0.61, 200, 0.6, 200).passes());
    }

    fn tiny_campaign(seed: u64) -> Campaign {
        let cfg = Config {
            seed,
            nu_s: 4,
            mesh: 2,
            kappa: 4,
            ..Config::default().with_uncertainty(0.3, 0.2)
        };
        Campaign::from_config(&cfg).unwrap()
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let c = tiny_campaign(5);
        let a = c.run_with_threads(Some(1)).unwrap();
        let b = c.run_with_threads(Some(3)).unwrap();
        assert!(a.failures.is_empty());
        assert_eq!(a.records, b.records);
        assert_eq!(a.records[2], c.realization(2).unwrap());
        assert_ne!(a.records, tiny_campaign(6).run().records);
    }
}
