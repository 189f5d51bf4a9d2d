//! Gamma approximation of the full conditional of the robustness parameter
//! `eta`, and an importance-sampling check of its accuracy.
//!
//! Given the local variances `sigma2` and the scale `rho2`, the conditional
//! density of `eta` under a `Ga(c, d)` prior is proportional to
//!
//! ```text
//! f(eta) = K_1(eta)^-n exp(-eta P) eta^(c-1) exp(-d eta),
//! P = 1/2 sum_i (sigma2_i / rho2 + rho2 / sigma2_i).
//! ```
//!
//! [`solve_ab`] finds `Ga(A, B)` whose log density matches the first two
//! derivatives of `log f` at its own mean `A / B`. At the fixed point the mean
//! satisfies `d/deta log f + 1/eta = 0`.

use log::{debug, warn};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{positive, HblError, Result};
use crate::rng_dist::{sample_gamma, sample_gig, GigParams, RngStream};
use crate::special_fn::{dlog_k, log_bessel_k_scaled, log_k_derivatives};

/// Lower bound on the iterate inside the fixed-point loop.
const ETA_FLOOR: f64 = 1e-8;

/// Shape and rate are both multiplied by this factor to obtain the
/// importance proposal: same mean, twice the standard deviation.
const PROPOSAL_WIDENING: f64 = 0.25;

/// Result of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox {
    pub shape: f64,
    pub rate: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub p_stat: f64,
}

impl GammaApprox {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn log_pdf(&self, eta: f64) -> f64 {
        gamma_log_pdf(eta, self.shape, self.rate)
    }
}

/// Starting values for the `(A, B)` iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedPointStart {
    /// `A = c + n`, `B = d + P`.
    #[default]
    Standard,
    /// `A = c + n/2`, `B = d + P - n`.
    Alternative,
}

/// `P = 1/2 sum_i (sigma2_i / rho2 + rho2 / sigma2_i)`. Always at least n.
pub fn compute_p(sigma2: &[f64], rho2: f64) -> f64 {
    let (sum, inv_sum) = sigma2
        .iter()
        .fold((0.0, 0.0), |(a, b), &s| (a + s, b + 1.0 / s));
    0.5 * (sum / rho2 + rho2 * inv_sum)
}

/// Gamma fixed point with the standard starting values.
pub fn solve_ab(n: usize, p_stat: f64, c: f64, d: f64, max_iter: usize, tol: f64) -> GammaApprox {
    solve_ab_from(n, p_stat, c, d, max_iter, tol, FixedPointStart::Standard)
}

/// Gamma fixed point from the chosen starting values. Returns the last
/// iterate with `converged = false` when the tolerance is not reached within
/// `max_iter` steps.
pub fn solve_ab_from(
    n: usize,
    p_stat: f64,
    c: f64,
    d: f64,
    max_iter: usize,
    tol: f64,
    start: FixedPointStart,
) -> GammaApprox {
    let nf = n as f64;
    let (mut shape, mut rate) = match start {
        FixedPointStart::Standard => (c + nf, d + p_stat),
        FixedPointStart::Alternative => (c + 0.5 * nf, d + p_stat - nf),
    };
    if !(rate > 0.0) {
        rate = d + p_stat;
    }
    let mut converged = false;
    let mut used = 0;
    for _ in 0..max_iter {
        used += 1;
        let eta = (shape / rate).max(ETA_FLOOR);
        // derivatives are finite for every positive argument
        let (l1, l2) = log_k_derivatives(1.0, eta).unwrap_or((-1.0, 0.0));
        shape = c + nf * eta * eta * l2;
        rate = d + (shape - c) / eta + nf * l1 + p_stat;
        if (eta / (shape / rate) - 1.0).abs() < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        debug!("eta fixed point not converged after {used} steps (n={n}, P={p_stat})");
    }
    GammaApprox {
        shape,
        rate,
        iterations_used: used,
        converged,
        p_stat,
    }
}

/// `d/deta log f(eta) + 1/eta`; zero at a fixed point of [`solve_ab`].
pub fn barrier_score(eta: f64, n: usize, p_stat: f64, c: f64, d: f64) -> Result<f64> {
    let eta = positive("eta", eta)?;
    Ok(-(n as f64) * dlog_k(1.0, eta)? + c / eta - p_stat - d)
}

/// Unnormalized log density of the `eta` full conditional.
pub fn true_eta_logpdf_unnorm(eta: f64, n: usize, p_stat: f64, c: f64, d: f64) -> Result<f64> {
    let eta = positive("eta", eta)?;
    let log_k1 = if n == 0 {
        0.0
    } else {
        log_bessel_k_scaled(1.0, eta)? - eta
    };
    Ok(-(n as f64) * log_k1 - eta * p_stat + (c - 1.0) * eta.ln() - d * eta)
}

fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    TotalVariation,
    Kl,
    ReverseKl,
}

/// Divergences between the normalized `eta` conditional `f` and its gamma
/// approximation `g`. `kl` is `KL(f || g)`, `reverse_kl` is `KL(g || f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyEstimate {
    pub tv: f64,
    pub kl: f64,
    pub reverse_kl: f64,
    /// Effective sample size of the `f` weights as a fraction of the draws.
    pub ess_fraction: f64,
    pub approx: GammaApprox,
}

impl DiscrepancyEstimate {
    pub fn get(&self, measure: Divergence) -> f64 {
        match measure {
            Divergence::TotalVariation => self.tv,
            Divergence::Kl => self.kl,
            Divergence::ReverseKl => self.reverse_kl,
        }
    }
}

/// Importance-sampling estimate of the divergences between the true `eta`
/// conditional for `(n, P)` and the gamma fixed-point approximation.
///
/// Draws come from a gamma proposal with the approximation's mean and twice
/// its standard deviation; the normalizing constant of `f` is estimated from
/// the same draws, and the gamma weights are self-normalized the same way
/// so that `f = g` gives exactly zero. Estimates are clipped to their valid ranges.
pub fn discrepancy(
    n: usize,
    p_stat: f64,
    c: f64,
    d: f64,
    mc_size: usize,
    rng: &mut RngStream,
) -> Result<DiscrepancyEstimate> {
    if mc_size < 2 {
        return Err(HblError::InsufficientSamples {
            needed: 2,
            got: mc_size,
        });
    }
    let approx = solve_ab(n, p_stat, c, d, 50, 1e-12);
    let (qa, qb) = (
        PROPOSAL_WIDENING * approx.shape,
        PROPOSAL_WIDENING * approx.rate,
    );

    let mut log_wf = Vec::with_capacity(mc_size);
    let mut log_wg = Vec::with_capacity(mc_size);
    for _ in 0..mc_size {
        let eta = sample_gamma(qa, qb, rng)?;
        if !(eta > 0.0) || !eta.is_finite() {
            continue;
        }
        let lq = gamma_log_pdf(eta, qa, qb);
        log_wf.push(true_eta_logpdf_unnorm(eta, n, p_stat, c, d)? - lq);
        log_wg.push(approx.log_pdf(eta) - lq);
    }
    let m = log_wf.len() as f64;

    // log of the normalizing constant of f: log mean exp(log_wf)
    let shift = log_wf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_f: f64 = log_wf.iter().map(|w| (w - shift).exp()).sum();
    let log_z = shift + (sum_f / m).ln();

    let shift_g = log_wg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_g: f64 = log_wg.iter().map(|w| (w - shift_g).exp()).sum();
    let log_zg = shift_g + (sum_g / m).ln();

    // both weight sets are self-normalized to mean one
    let mut tv = 0.0;
    let mut kl = 0.0;
    let mut rev = 0.0;
    let mut sum_f2 = 0.0;
    for (lf, lg) in log_wf.iter().zip(&log_wg) {
        let wf = (lf - log_z).exp();
        let wg = (lg - log_zg).exp();
        tv += (wf - wg).abs();
        let log_ratio = (lf - log_z) - (lg - log_zg);
        kl += wf * log_ratio;
        rev -= wg * log_ratio;
        sum_f2 += wf * wf;
    }
    let tv = (0.5 * tv / m).clamp(0.0, 1.0);
    let kl = (kl / m).max(0.0);
    let reverse_kl = (rev / m).max(0.0);
    let ess_fraction = m / sum_f2;
    if ess_fraction < 0.05 {
        warn!(
            "importance weights degenerate (ESS {:.1}% of {mc_size}) for n={n}, P={p_stat}",
            100.0 * ess_fraction
        );
    }
    Ok(DiscrepancyEstimate {
        tv,
        kl,
        reverse_kl,
        ess_fraction,
        approx,
    })
}

/// One row of the approximation-accuracy table: the maximum (and mean) of
/// each divergence over simulated datasets for one `(n, c = d)` setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRow {
    pub n: usize,
    pub prior: f64,
    pub max_tv: f64,
    pub max_kl: f64,
    pub max_reverse_kl: f64,
    pub mean_tv: f64,
    pub mean_kl: f64,
    pub mean_reverse_kl: f64,
}

/// Settings of the approximation-accuracy study.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub n_grid: Vec<usize>,
    pub prior_grid: Vec<f64>,
    pub datasets: usize,
    pub mc_size: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_grid: vec![10, 20, 50, 100, 200],
            prior_grid: vec![0.01, 0.1, 1.0],
            datasets: 100,
            mc_size: 10_000,
            seed: 1,
        }
    }
}

/// Domain tag for the streams of the validation study.
const VALIDATION_DOMAIN: u32 = 0x7661;

/// For every `(n, c = d)` pair: draw `datasets` samples of size n from
/// `GIG(1, 1, 1)`, treat them as the local variances with `rho2 = 1`, and
/// estimate the divergences of the gamma approximation.
pub fn validation_study(config: &ValidationConfig) -> Result<Vec<ValidationRow>> {
    let mut rows = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        for &prior in &config.prior_grid {
            positive("prior hyperparameter", prior)?;
            let estimates: Vec<DiscrepancyEstimate> = (0..config.datasets)
                .into_par_iter()
                .map(|k| {
                    // same data for every prior setting of a given n
                    let idx = (ni as u32) << 16 | k as u32;
                    let mut rng = RngStream::derived(config.seed, VALIDATION_DOMAIN, idx);
                    let mut sigma2 = Vec::with_capacity(n);
                    for _ in 0..n {
                        sigma2.push(sample_gig(GigParams::new(1.0, 1.0, 1.0), &mut rng)?);
                    }
                    let p_stat = compute_p(&sigma2, 1.0);
                    discrepancy(n, p_stat, prior, prior, config.mc_size, &mut rng)
                })
                .collect::<Result<_>>()?;
            let max =
                |f: fn(&DiscrepancyEstimate) -> f64| estimates.iter().map(f).fold(0.0, f64::max);
            let mean = |f: fn(&DiscrepancyEstimate) -> f64| {
                estimates.iter().map(f).sum::<f64>() / estimates.len().max(1) as f64
            };
            rows.push(ValidationRow {
                n,
                prior,
                max_tv: max(|e| e.tv),
                max_kl: max(|e| e.kl),
                max_reverse_kl: max(|e| e.reverse_kl),
                mean_tv: mean(|e| e.tv),
                mean_kl: mean(|e| e.kl),
                mean_reverse_kl: mean(|e| e.reverse_kl),
            });
        }
    }
    Ok(rows)
}
