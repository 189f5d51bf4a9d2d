//! Bayesian influence functions of posterior means for simple linear
//! regression under the hyperbolic likelihood.
//!
//! For posterior draws `theta = (beta0, beta1)`,
//!
//! ```text
//! IF_k(z | x) = n Cov(beta_k, H(theta, z | x))
//! H(theta, z | x) = log f(y_z | x; theta) - E_g[log f(t | x; theta)]
//! ```
//!
//! where `f` is the hyperbolic density with scale 1, `g` is the sampling
//! distribution of a fresh response at `x`, and the perturbed response is
//! `y_z = bbar0 + bbar1 x + z` with `bbar` the posterior mean.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{positive, HblError, Result};
use crate::gibbs::{update_beta, update_sigma2, PriorForm};
use crate::model::{ChainState, Dataset};
use crate::rng_dist::RngStream;

pub const MIN_POSTERIOR_DRAWS: usize = 10_000;
pub const MIN_G_DRAWS: usize = 2_000;

/// Log hyperbolic density kernel with unit scale.
fn log_kernel(resid: f64, eta: f64) -> f64 {
    -(eta * (eta + resid * resid)).sqrt()
}

/// `E_g[log f(t | x; theta)]` for every posterior draw, with the same
/// `g`-draws for all of them.
fn expected_log_lik(posterior: &DMatrix<f64>, x: f64, eta: f64, g_samples: &[f64]) -> Vec<f64> {
    (0..posterior.nrows())
        .map(|s| {
            let mu = posterior[(s, 0)] + posterior[(s, 1)] * x;
            g_samples
                .iter()
                .map(|t| log_kernel(t - mu, eta))
                .sum::<f64>()
                / g_samples.len() as f64
        })
        .collect()
}

fn check_draws(posterior: &DMatrix<f64>, g_samples: &[f64]) -> Result<()> {
    if posterior.ncols() != 2 {
        return Err(HblError::DimensionMismatch {
            expected: 2,
            got: posterior.ncols(),
        });
    }
    if posterior.nrows() < MIN_POSTERIOR_DRAWS {
        return Err(HblError::InsufficientSamples {
            needed: MIN_POSTERIOR_DRAWS,
            got: posterior.nrows(),
        });
    }
    if g_samples.len() < MIN_G_DRAWS {
        return Err(HblError::InsufficientSamples {
            needed: MIN_G_DRAWS,
            got: g_samples.len(),
        });
    }
    Ok(())
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (m - 1.0)
}

/// Influence function evaluator for one `(x, eta)` pair. The `g`-average
/// does not depend on `z`, so it is computed once.
pub struct InfluenceCurve<'a> {
    posterior: &'a DMatrix<f64>,
    n: usize,
    x: f64,
    eta: f64,
    center: f64,
    expected: Vec<f64>,
}

impl<'a> InfluenceCurve<'a> {
    pub fn new(
        posterior: &'a DMatrix<f64>,
        n: usize,
        x: f64,
        eta: f64,
        g_samples: &[f64],
    ) -> Result<Self> {
        check_draws(posterior, g_samples)?;
        positive("eta", eta)?;
        let center = posterior.column(0).mean() + posterior.column(1).mean() * x;
        Ok(InfluenceCurve {
            posterior,
            n,
            x,
            eta,
            center,
            expected: expected_log_lik(posterior, x, eta, g_samples),
        })
    }

    /// `(IF_0(z | x), IF_1(z | x))`.
    pub fn at(&self, z: f64) -> (f64, f64) {
        let y = self.center + z;
        let h: Vec<f64> = (0..self.posterior.nrows())
            .map(|s| {
                let mu = self.posterior[(s, 0)] + self.posterior[(s, 1)] * self.x;
                log_kernel(y - mu, self.eta) - self.expected[s]
            })
            .collect();
        let b0: Vec<f64> = self.posterior.column(0).iter().copied().collect();
        let b1: Vec<f64> = self.posterior.column(1).iter().copied().collect();
        let n = self.n as f64;
        (n * covariance(&b0, &h), n * covariance(&b1, &h))
    }
}

/// `IF_k(z | x)` for `k` in {0, 1}. `posterior` has columns `(beta0, beta1)`.
pub fn influence_function(
    k: usize,
    z: f64,
    x: f64,
    posterior: &DMatrix<f64>,
    n: usize,
    eta: f64,
    g_samples: &[f64],
) -> Result<f64> {
    if k > 1 {
        return Err(HblError::InvalidConfig(format!(
            "coefficient index {k} not in {{0, 1}}"
        )));
    }
    let (if0, if1) = InfluenceCurve::new(posterior, n, x, eta, g_samples)?.at(z);
    Ok(if k == 0 { if0 } else { if1 })
}

/// Posterior draws of `(beta0, beta1)` for `y = beta0 + beta1 x + e` with
/// hyperbolic errors (scale 1, fixed `eta`) and flat priors. `data` must have
/// a single covariate; the intercept column is added here.
pub fn fit_flat_prior_hlm(
    data: &Dataset,
    eta: f64,
    draws: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    positive("eta", eta)?;
    if data.p() != 1 {
        return Err(HblError::DimensionMismatch {
            expected: 1,
            got: data.p(),
        });
    }
    let n = data.n();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { data.x[(i, 0)] });
    let full = Dataset::new(data.y.clone(), design)?;
    let mut state = ChainState {
        beta: DVector::zeros(2),
        tau2: DVector::from_element(2, 1.0),
        sigma2: DVector::from_element(n, 1.0),
        rho2: 1.0,
        lambda2: 1.0,
        eta,
    };
    let mut out = DMatrix::zeros(draws, 2);
    for it in 0..burn_in + draws {
        state.beta =
            update_beta(&state, &full, PriorForm::Flat, rng).map_err(|e| e.at("beta", it))?;
        state.sigma2 = update_sigma2(&state, &full, rng).map_err(|e| e.at("sigma2", it))?;
        if it >= burn_in {
            out.set_row(it - burn_in, &state.beta.transpose());
        }
    }
    Ok(out)
}

/// Settings of the influence-function grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceConfig {
    pub n: usize,
    pub eta_list: Vec<f64>,
    pub x_values: Vec<f64>,
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    pub posterior_draws: usize,
    pub burn_in: usize,
    pub g_draws: usize,
    pub seed: u64,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        InfluenceConfig {
            n: 100,
            eta_list: vec![0.2, 0.5, 1.0],
            x_values: vec![-0.5, 1.0],
            z_min: -10.0,
            z_max: 10.0,
            z_points: 81,
            posterior_draws: 10_000,
            burn_in: 1_000,
            g_draws: 2_000,
            seed: 1,
        }
    }
}

impl InfluenceConfig {
    pub fn z_values(&self) -> Vec<f64> {
        if self.z_points == 1 {
            return vec![self.z_min];
        }
        let step = (self.z_max - self.z_min) / (self.z_points - 1) as f64;
        (0..self.z_points)
            .map(|i| self.z_min + step * i as f64)
            .collect()
    }
}

/// Influence functions on the grid `eta x x x z`; `if0[e][k][i]` is
/// `IF_0(z_i | x_k)` under `eta_list[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGrid {
    pub x_values: Vec<f64>,
    pub z_values: Vec<f64>,
    pub eta_settings: Vec<f64>,
    pub if0: Vec<Vec<Vec<f64>>>,
    pub if1: Vec<Vec<Vec<f64>>>,
}

impl InfluenceGrid {
    /// Flattened rows `(x, z, eta, IF0, IF1)`.
    pub fn rows(&self) -> Vec<[f64; 5]> {
        let mut out = Vec::new();
        for (e, &eta) in self.eta_settings.iter().enumerate() {
            for (k, &x) in self.x_values.iter().enumerate() {
                for (i, &z) in self.z_values.iter().enumerate() {
                    out.push([x, z, eta, self.if0[e][k][i], self.if1[e][k][i]]);
                }
            }
        }
        out
    }
}

const INFLUENCE_DOMAIN: u32 = 0x1f;

/// One curve per x value, each over the z grid.
type Curves = Vec<Vec<f64>>;

/// Simulates `y = x + N(0, 1)` with `x ~ N(0, 1)`, fits the flat-prior model
/// for each `eta`, and evaluates both influence functions on the grid.
pub fn run_influence_grid(config: &InfluenceConfig) -> Result<InfluenceGrid> {
    let mut data_rng = RngStream::derived(config.seed, INFLUENCE_DOMAIN, 0);
    let x = DVector::from_fn(config.n, |_, _| data_rng.std_normal());
    let y = DVector::from_fn(config.n, |i, _| x[i] + data_rng.std_normal());
    let data = Dataset::new(y, DMatrix::from_column_slice(config.n, 1, x.as_slice()))?;
    let z_values = config.z_values();

    // common g-draws per x across all eta
    let g: Vec<Vec<f64>> = config
        .x_values
        .iter()
        .enumerate()
        .map(|(k, &xv)| {
            let mut rng = RngStream::derived(config.seed, INFLUENCE_DOMAIN, 100 + k as u32);
            (0..config.g_draws).map(|_| xv + rng.std_normal()).collect()
        })
        .collect();

    let per_eta: Vec<(Curves, Curves)> = config
        .eta_list
        .par_iter()
        .enumerate()
        .map(|(e, &eta)| {
            let mut rng = RngStream::derived(config.seed, INFLUENCE_DOMAIN, 1 + e as u32);
            let post =
                fit_flat_prior_hlm(&data, eta, config.posterior_draws, config.burn_in, &mut rng)?;
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (k, &xv) in config.x_values.iter().enumerate() {
                let curve = InfluenceCurve::new(&post, config.n, xv, eta, &g[k])?;
                let (c0, c1): (Vec<f64>, Vec<f64>) = z_values.iter().map(|&z| curve.at(z)).unzip();
                a.push(c0);
                b.push(c1);
            }
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let (if0, if1) = per_eta.into_iter().unzip();
    Ok(InfluenceGrid {
        x_values: config.x_values.clone(),
        z_values,
        eta_settings: config.eta_list.clone(),
        if0,
        if1,
    })
}
