//! Gibbs samplers: the Bayesian Huberized lasso (learned or fixed `eta`), its
//! unconditional-prior variant, and the Bayesian lasso, median-regression
//! lasso and Student-t lasso baselines.
//!
//! All samplers work on centered data. The intercept is not part of the
//! chain; at each stored iteration it is drawn from its conditional under a
//! flat prior given the other blocks, `N(ybar - xbar' beta + sum(w r) / sum(w),
//! 1 / sum(w))` with `w` the per-observation precisions, and stored as
//! `beta0`.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{positive, HblError, Result};
use crate::eta_approx::{compute_p, solve_ab, GammaApprox};
use crate::model::{
    coefficient_names, ChainState, Dataset, EtaMode, FixedPointStats, Hyperparams, LambdaMode,
    PosteriorSamples,
};
use crate::rng_dist::{
    sample_gamma, sample_gig, sample_inv_gamma, sample_inv_gauss, sample_inv_gauss_recip,
    slice_sample, GigParams, PrecisionGaussian, RngStream,
};

/// Coefficients smaller than this in magnitude are replaced by it (squared)
/// in the local-scale update.
const BETA_SQ_FLOOR: f64 = 1e-300;

/// Degrees of freedom of the Student-t baseline.
pub const TBL_DOF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Hbl,
    HblFixedEta,
    Bl,
    Mbl,
    Tbl,
    HblUnconditionalPrior,
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::Hbl => "HBL",
            SamplerKind::HblFixedEta => "HBL_fixed_eta",
            SamplerKind::Bl => "BL",
            SamplerKind::Mbl => "mBL",
            SamplerKind::Tbl => "tBL",
            SamplerKind::HblUnconditionalPrior => "HBL_unconditional_prior",
        }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, SamplerKind::Bl | SamplerKind::Mbl | SamplerKind::Tbl)
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = HblError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hbl" => Ok(SamplerKind::Hbl),
            "hbl_fixed_eta" | "hbl-fixed" => Ok(SamplerKind::HblFixedEta),
            "bl" => Ok(SamplerKind::Bl),
            "mbl" => Ok(SamplerKind::Mbl),
            "tbl" => Ok(SamplerKind::Tbl),
            "hbl_unconditional_prior" | "hbl-unconditional" => {
                Ok(SamplerKind::HblUnconditionalPrior)
            }
            other => Err(HblError::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Settings for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub hyper: Hyperparams,
    pub sampler_kind: SamplerKind,
    pub seed: u64,
    pub stream_id: u64,
    /// Also store every `tau2_j` and `sigma2_i` (or the baseline's latent
    /// scales).
    pub store_full_state: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 2500,
            burn_in: 500,
            thin: 1,
            hyper: Hyperparams::default(),
            sampler_kind: SamplerKind::Hbl,
            seed: 1,
            stream_id: 0,
            store_full_state: false,
        }
    }
}

impl FitConfig {
    pub fn new(kind: SamplerKind, iterations: usize, burn_in: usize, seed: u64) -> Self {
        FitConfig {
            iterations,
            burn_in,
            sampler_kind: kind,
            seed,
            ..FitConfig::default()
        }
    }

    pub fn with_eta(mut self, eta: EtaMode) -> Self {
        self.hyper.eta_mode = eta;
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaMode) -> Self {
        self.hyper.lambda_mode = lambda;
        self
    }

    /// Number of draws a run with this configuration stores.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(HblError::InvalidConfig(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(HblError::InvalidConfig("thin must be positive".into()));
        }
        self.hyper.validate()?;
        if self.sampler_kind == SamplerKind::HblFixedEta
            && !matches!(self.hyper.eta_mode, EtaMode::Fixed(_))
        {
            return Err(HblError::InvalidConfig(
                "fixed-eta sampler needs a fixed eta value".into(),
            ));
        }
        Ok(())
    }

    fn rng(&self) -> RngStream {
        RngStream::new(self.seed, self.stream_id)
    }
}

/// Prior on the coefficients given the local scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorForm {
    /// `beta_j | tau2_j, rho2 ~ N(0, rho2 tau2_j)`.
    Conditional,
    /// `beta_j | tau2_j ~ N(0, tau2_j)`.
    Unconditional,
    /// Improper uniform prior; `tau2` is ignored.
    Flat,
}

/// Centered copy of the data with the means needed to recover the intercept.
#[derive(Debug, Clone)]
pub struct CenteredData {
    pub data: Dataset,
    pub y_mean: f64,
    pub x_mean: DVector<f64>,
}

impl CenteredData {
    pub fn new(data: &Dataset) -> Self {
        let (y_mean, x_mean) = data.means();
        CenteredData {
            data: data.centered(),
            y_mean,
            x_mean,
        }
    }
}

/// `X^T diag(w) X`.
fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xs = x.clone();
    let sw = w.map(f64::sqrt);
    for mut col in xs.column_iter_mut() {
        col.component_mul_assign(&sw);
    }
    xs.tr_mul(&xs)
}

/// Draws `beta ~ N(A^-1 h, A^-1)` with `A = X^T W X + prior` and
/// `h = X^T W y`, where `W = diag(weights)` and `prior_diag` is added to the
/// diagonal of `A`. A precomputed `X^T W X` may be passed as `gram`.
fn draw_gaussian_coefficients(
    data: &Dataset,
    gram: Option<&DMatrix<f64>>,
    weights: &DVector<f64>,
    prior_diag: Option<&DVector<f64>>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let mut precision = match gram {
        Some(g) => g.clone(),
        None => weighted_gram(&data.x, weights),
    };
    if let Some(pd) = prior_diag {
        for j in 0..pd.len() {
            precision[(j, j)] += pd[j];
        }
    }
    let h = data.x.tr_mul(&data.y.component_mul(weights));
    Ok(PrecisionGaussian::new(&h, precision)?.sample(rng))
}

/// Draw of the coefficient block for the hyperbolic model.
pub fn update_beta(
    state: &ChainState,
    data: &Dataset,
    prior: PriorForm,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let w = state.sigma2.map(|s| 1.0 / s);
    let prior_diag = match prior {
        PriorForm::Conditional => Some(state.tau2.map(|t| 1.0 / (t * state.rho2))),
        PriorForm::Unconditional => Some(state.tau2.map(|t| 1.0 / t)),
        PriorForm::Flat => None,
    };
    draw_gaussian_coefficients(data, None, &w, prior_diag.as_ref(), rng)
}

/// Draw of the global scale `rho2`.
pub fn update_rho2(
    state: &ChainState,
    data: &Dataset,
    prior: PriorForm,
    rng: &mut RngStream,
) -> Result<f64> {
    let n = data.n() as f64;
    let p = data.p() as f64;
    let inv_sum: f64 = state.sigma2.iter().map(|s| 1.0 / s).sum();
    let sum: f64 = state.sigma2.iter().sum();
    let (order, b) = match prior {
        PriorForm::Conditional => {
            let quad: f64 = state
                .beta
                .iter()
                .zip(state.tau2.iter())
                .map(|(b, t)| b * b / t)
                .sum();
            (-n - 0.5 * p, state.eta * sum + quad)
        }
        PriorForm::Unconditional | PriorForm::Flat => (-n, state.eta * sum),
    };
    let a = state.eta * inv_sum;
    positive("rho2 conditional a", a)?;
    positive("rho2 conditional b", b)?;
    sample_gig(GigParams::from_ab(order, a, b), rng)
}

/// Slice move on `log rho2` targeting the conditional of `rho2` with the
/// latent `sigma2` integrated out (a hyperbolic likelihood). The GIG draw
/// alone barely moves `rho2` when `eta` is large since `rho2` and `sigma2`
/// pin each other down; `sigma2` must be redrawn right after this move.
pub fn refresh_rho2(
    state: &ChainState,
    data: &Dataset,
    prior: PriorForm,
    rng: &mut RngStream,
) -> Result<f64> {
    let resid = &data.y - &data.x * &state.beta;
    refresh_rho2_given_resid(state, &resid, prior, rng)
}

fn refresh_rho2_given_resid(
    state: &ChainState,
    resid: &DVector<f64>,
    prior: PriorForm,
    rng: &mut RngStream,
) -> Result<f64> {
    let n = resid.len() as f64;
    let p = state.beta.len() as f64;
    let resid2 = resid.component_mul(resid);
    let eta = state.eta;
    let (power, quad, dof) = match prior {
        PriorForm::Conditional => {
            let quad: f64 = state
                .beta
                .iter()
                .zip(state.tau2.iter())
                .map(|(b, t)| b * b / t)
                .sum();
            (0.5 * (n + p), quad, n + p)
        }
        PriorForm::Unconditional | PriorForm::Flat => (0.5 * n, 0.0, n),
    };
    // density of u = log rho2, Jacobian included
    let log_f = |u: f64| {
        // absolute error of eta * (sqrt(1 + t) - 1) is ~eta * 1e-16 per term,
        // negligible against the slice level
        let k = (-u).exp() / eta;
        let fit = sum_sqrt_affine(resid2.as_slice(), k) - n;
        -power * u - eta * fit - 0.5 * quad * (-u).exp()
    };
    let width = (18.0 / dof.max(1.0)).sqrt().min(4.0);
    let u = slice_sample(state.rho2.ln(), log_f, width, 32, rng)?;
    positive("rho2", u.exp())
}

/// `sum_i sqrt(1 + k x_i)`, with independent lanes so the loop vectorizes.
fn sum_sqrt_affine(x: &[f64], k: f64) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = x.chunks_exact(4);
    let tail: f64 = chunks
        .remainder()
        .iter()
        .map(|&v| (1.0 + k * v).sqrt())
        .sum();
    for c in chunks {
        for l in 0..4 {
            acc[l] += (1.0 + k * c[l]).sqrt();
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn floored_square(beta: f64, j: usize) -> f64 {
    let sq = beta * beta;
    if beta.abs() < BETA_SQ_FLOOR {
        warn!("coefficient {j} is numerically zero; local scale draw is degenerate");
        BETA_SQ_FLOOR
    } else {
        sq
    }
}

/// Draw of the local coefficient scales `tau2` (returned as variances).
/// `scale2` is `rho2` for the conditional prior and 1 for the unconditional one.
fn draw_tau2(
    beta: &DVector<f64>,
    lambda2: f64,
    scale2: f64,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(beta.len());
    for j in 0..beta.len() {
        let b2 = floored_square(beta[j], j);
        let mu = (lambda2 * scale2 / b2).sqrt();
        out[j] = 1.0 / sample_inv_gauss(mu, lambda2, rng)?;
    }
    Ok(out)
}

pub fn update_tau2(
    state: &ChainState,
    prior: PriorForm,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let scale2 = match prior {
        PriorForm::Conditional => state.rho2,
        PriorForm::Unconditional | PriorForm::Flat => 1.0,
    };
    draw_tau2(&state.beta, state.lambda2, scale2, rng)
}

/// Draw of the local observation variances `sigma2`.
pub fn update_sigma2(
    state: &ChainState,
    data: &Dataset,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let resid = &data.y - &data.x * &state.beta;
    sigma2_given_resid(state, &resid, rng)
}

fn sigma2_given_resid(
    state: &ChainState,
    resid: &DVector<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let (eta, rho2) = (state.eta, state.rho2);
    let inv_shape = rho2 / eta;
    let mut out = DVector::zeros(resid.len());
    for (o, r) in out.as_mut_slice().iter_mut().zip(resid.as_slice()) {
        let inv_mu = ((r * r + eta * rho2) * inv_shape).sqrt();
        *o = sample_inv_gauss_recip(inv_mu, inv_shape, rng)?;
    }
    Ok(out)
}

/// Draw of `lambda^2 ~ Ga(a + p, b + sum(tau2) / 2)`.
pub fn update_lambda2(
    tau2: &DVector<f64>,
    hyper: &Hyperparams,
    rng: &mut RngStream,
) -> Result<f64> {
    sample_gamma(hyper.a + tau2.len() as f64, hyper.b + 0.5 * tau2.sum(), rng)
}

/// Draw of `eta` from the gamma approximation of its conditional.
pub fn update_eta(
    state: &ChainState,
    hyper: &Hyperparams,
    rng: &mut RngStream,
) -> Result<(f64, GammaApprox)> {
    let p_stat = compute_p(state.sigma2.as_slice(), state.rho2);
    let approx = solve_ab(
        state.sigma2.len(),
        p_stat,
        hyper.c,
        hyper.d,
        hyper.fp_max_iter,
        hyper.fp_tol,
    );
    let eta = sample_gamma(approx.shape, approx.rate, rng)?;
    Ok((eta, approx))
}

/// One sweep in the order beta, rho2, (tau2, sigma2), lambda2, eta.
/// Returns the fixed-point result when `eta` was updated.
pub fn gibbs_step(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &Hyperparams,
    prior: PriorForm,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<Option<GammaApprox>> {
    state.beta = update_beta(state, data, prior, rng).map_err(|e| e.at("beta", iteration))?;
    let resid = &data.y - &data.x * &state.beta;
    state.rho2 =
        refresh_rho2_given_resid(state, &resid, prior, rng).map_err(|e| e.at("rho2", iteration))?;
    let tau2 = update_tau2(state, prior, rng).map_err(|e| e.at("tau2", iteration))?;
    let sigma2 = sigma2_given_resid(state, &resid, rng).map_err(|e| e.at("sigma2", iteration))?;
    state.tau2 = tau2;
    state.sigma2 = sigma2;
    if hyper.lambda_mode == LambdaMode::Learned {
        state.lambda2 =
            update_lambda2(&state.tau2, hyper, rng).map_err(|e| e.at("lambda2", iteration))?;
    }
    if hyper.eta_mode == EtaMode::Learned {
        let (eta, approx) = update_eta(state, hyper, rng).map_err(|e| e.at("eta", iteration))?;
        if !approx.converged {
            log::debug!("iteration {iteration}: eta fixed point stopped early");
        }
        state.eta = eta;
        return Ok(Some(approx));
    }
    Ok(None)
}

/// Intercept draw given slopes, residuals of the centered data and
/// per-observation precisions.
fn draw_intercept(
    centered: &CenteredData,
    beta: &DVector<f64>,
    resid: &DVector<f64>,
    weights: &DVector<f64>,
    rng: &mut RngStream,
) -> f64 {
    let wsum = weights.sum();
    let shift = resid.dot(weights) / wsum;
    centered.y_mean - centered.x_mean.dot(beta) + shift + rng.std_normal() / wsum.sqrt()
}

/// A Gibbs sampler that can be driven by [`drive`].
trait Chain {
    fn names(&self) -> Vec<String>;
    fn sweep(&mut self, iteration: usize, rng: &mut RngStream) -> Result<()>;
    fn record(&self, row: &mut Vec<f64>, rng: &mut RngStream);
    fn fixed_point(&self) -> FixedPointStats {
        FixedPointStats::default()
    }
}

fn drive(
    chain: &mut dyn Chain,
    config: &FitConfig,
    rng: &mut RngStream,
) -> Result<PosteriorSamples> {
    let names = chain.names();
    let stored = config.stored_draws();
    let mut values = Vec::with_capacity(stored * names.len());
    let mut row = Vec::with_capacity(names.len());
    let mut count = 0;
    for it in 0..config.iterations {
        chain.sweep(it, rng)?;
        if it >= config.burn_in
            && (it + 1 - config.burn_in).is_multiple_of(config.thin)
            && count < stored
        {
            row.clear();
            chain.record(&mut row, rng);
            values.extend_from_slice(&row);
            count += 1;
        }
    }
    Ok(PosteriorSamples {
        draws: DMatrix::from_row_slice(count, names.len(), &values),
        names,
        burn_in: config.burn_in,
        thin: config.thin,
        fixed_point: chain.fixed_point(),
    })
}

struct HblChain {
    centered: CenteredData,
    state: ChainState,
    hyper: Hyperparams,
    prior: PriorForm,
    stats: FixedPointStats,
    store_full: bool,
}

impl Chain for HblChain {
    fn names(&self) -> Vec<String> {
        let mut names = coefficient_names(self.state.beta.len());
        names.extend(["rho2", "lambda2", "eta"].map(String::from));
        if self.store_full {
            names.extend((1..=self.state.tau2.len()).map(|j| format!("tau2_{j}")));
            names.extend((1..=self.state.sigma2.len()).map(|i| format!("sigma2_{i}")));
        }
        names
    }

    fn sweep(&mut self, iteration: usize, rng: &mut RngStream) -> Result<()> {
        let approx = gibbs_step(
            &mut self.state,
            &self.centered.data,
            &self.hyper,
            self.prior,
            iteration,
            rng,
        )?;
        if let Some(a) = approx {
            self.stats.calls += 1;
            self.stats.total_iterations += a.iterations_used;
            if a.converged {
                self.stats.converged += 1;
            }
        }
        Ok(())
    }

    fn record(&self, row: &mut Vec<f64>, rng: &mut RngStream) {
        let s = &self.state;
        let data = &self.centered.data;
        let resid = &data.y - &data.x * &s.beta;
        let w = s.sigma2.map(|v| 1.0 / v);
        row.push(draw_intercept(&self.centered, &s.beta, &resid, &w, rng));
        row.extend(s.beta.iter());
        row.extend([s.rho2, s.lambda2, s.eta]);
        if self.store_full {
            row.extend(s.tau2.iter());
            row.extend(s.sigma2.iter());
        }
    }

    fn fixed_point(&self) -> FixedPointStats {
        self.stats
    }
}

/// Runs the Huberized-lasso sampler selected by `config.sampler_kind`
/// (or the baseline it names) and returns the stored draws.
pub fn run_chain(data: &Dataset, config: &FitConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    match config.sampler_kind {
        SamplerKind::Bl | SamplerKind::Mbl | SamplerKind::Tbl => {
            run_baseline(config.sampler_kind, data, config)
        }
        SamplerKind::Hbl | SamplerKind::HblFixedEta => {
            run_hbl(data, config, &config.hyper, PriorForm::Conditional)
        }
        SamplerKind::HblUnconditionalPrior => {
            run_hbl(data, config, &config.hyper, PriorForm::Unconditional)
        }
    }
}

fn run_hbl(
    data: &Dataset,
    config: &FitConfig,
    hyper: &Hyperparams,
    prior: PriorForm,
) -> Result<PosteriorSamples> {
    let centered = CenteredData::new(data);
    let state = ChainState::initial(&centered.data, hyper)?;
    let mut chain = HblChain {
        centered,
        state,
        hyper: *hyper,
        prior,
        stats: FixedPointStats::default(),
        store_full: config.store_full_state,
    };
    let mut rng = config.rng();
    let samples = drive(&mut chain, config, &mut rng)?;
    let fp = samples.fixed_point;
    if fp.calls > 0 && fp.converged < fp.calls {
        log::info!(
            "eta fixed point converged in {} of {} sweeps",
            fp.converged,
            fp.calls
        );
    }
    Ok(samples)
}

/// Huberized lasso with the unconditional Laplace prior on the coefficients
/// and both `lambda` and `eta` held fixed.
pub fn run_unconditional_prior_chain(
    data: &Dataset,
    config: &FitConfig,
    lambda: f64,
    eta: f64,
) -> Result<PosteriorSamples> {
    let mut cfg = config.clone();
    cfg.sampler_kind = SamplerKind::HblUnconditionalPrior;
    cfg.hyper.lambda_mode = LambdaMode::Fixed(positive("lambda", lambda)?);
    cfg.hyper.eta_mode = EtaMode::Fixed(positive("eta", eta)?);
    cfg.validate()?;
    run_hbl(data, &cfg, &cfg.hyper, PriorForm::Unconditional)
}

/// Ridge start shared by the baselines.
fn ridge_start(data: &Dataset) -> Result<(DVector<f64>, f64)> {
    let state = ChainState::initial(data, &Hyperparams::default())?;
    Ok((state.beta, state.rho2))
}

/// Bayesian lasso: `y ~ N(X beta, sigma2)`, `beta_j ~ N(0, sigma2 tau2_j)`,
/// `tau2_j ~ Exp(lambda^2 / 2)`, `pi(sigma2) ∝ 1/sigma2`.
struct BlChain {
    centered: CenteredData,
    gram: DMatrix<f64>,
    beta: DVector<f64>,
    tau2: DVector<f64>,
    sigma2: f64,
    lambda2: f64,
    hyper: Hyperparams,
    store_full: bool,
}

impl Chain for BlChain {
    fn names(&self) -> Vec<String> {
        let mut names = coefficient_names(self.beta.len());
        names.extend(["sigma2", "lambda2"].map(String::from));
        if self.store_full {
            names.extend((1..=self.tau2.len()).map(|j| format!("tau2_{j}")));
        }
        names
    }

    fn sweep(&mut self, it: usize, rng: &mut RngStream) -> Result<()> {
        let data = &self.centered.data;
        let n = data.n() as f64;
        let p = data.p() as f64;
        let inv = 1.0 / self.sigma2;
        let gram = &self.gram * inv;
        let w = DVector::from_element(data.n(), inv);
        let prior = self.tau2.map(|t| inv / t);
        self.beta = draw_gaussian_coefficients(data, Some(&gram), &w, Some(&prior), rng)
            .map_err(|e| e.at("beta", it))?;

        let resid = &data.y - &data.x * &self.beta;
        let quad: f64 = self
            .beta
            .iter()
            .zip(self.tau2.iter())
            .map(|(b, t)| b * b / t)
            .sum();
        let shape = 0.5 * (n - 1.0) + 0.5 * p;
        self.sigma2 = sample_inv_gamma(shape, 0.5 * resid.norm_squared() + 0.5 * quad, rng)
            .map_err(|e| e.at("sigma2", it))?;
        self.tau2 =
            draw_tau2(&self.beta, self.lambda2, self.sigma2, rng).map_err(|e| e.at("tau2", it))?;
        if self.hyper.lambda_mode == LambdaMode::Learned {
            self.lambda2 =
                update_lambda2(&self.tau2, &self.hyper, rng).map_err(|e| e.at("lambda2", it))?;
        }
        Ok(())
    }

    fn record(&self, row: &mut Vec<f64>, rng: &mut RngStream) {
        let data = &self.centered.data;
        let resid = &data.y - &data.x * &self.beta;
        let w = DVector::from_element(data.n(), 1.0 / self.sigma2);
        row.push(draw_intercept(&self.centered, &self.beta, &resid, &w, rng));
        row.extend(self.beta.iter());
        row.extend([self.sigma2, self.lambda2]);
        if self.store_full {
            row.extend(self.tau2.iter());
        }
    }
}

/// Median-regression lasso: asymmetric Laplace likelihood at quantile 1/2
/// written as `y_i = x_i' beta + sqrt(8 sigma v_i) z_i`, `v_i ~ Exp(mean
/// sigma)`, with `beta_j ~ N(0, sigma tau2_j)`, `tau2_j ~ Exp(lambda^2 / 2)`
/// and `pi(sigma) ∝ 1/sigma`.
struct MblChain {
    centered: CenteredData,
    beta: DVector<f64>,
    tau2: DVector<f64>,
    v: DVector<f64>,
    sigma: f64,
    lambda2: f64,
    hyper: Hyperparams,
    store_full: bool,
}

impl Chain for MblChain {
    fn names(&self) -> Vec<String> {
        let mut names = coefficient_names(self.beta.len());
        names.extend(["sigma", "lambda2"].map(String::from));
        if self.store_full {
            names.extend((1..=self.tau2.len()).map(|j| format!("tau2_{j}")));
            names.extend((1..=self.v.len()).map(|i| format!("v_{i}")));
        }
        names
    }

    fn sweep(&mut self, it: usize, rng: &mut RngStream) -> Result<()> {
        let data = &self.centered.data;
        let n = data.n() as f64;
        let p = data.p() as f64;

        let w = self.v.map(|v| 1.0 / (8.0 * self.sigma * v));
        let prior = self.tau2.map(|t| 1.0 / (self.sigma * t));
        self.beta = draw_gaussian_coefficients(data, None, &w, Some(&prior), rng)
            .map_err(|e| e.at("beta", it))?;

        let resid = &data.y - &data.x * &self.beta;
        let shape = 2.0 / self.sigma;
        for i in 0..self.v.len() {
            let r = resid[i].abs().max(1e-150);
            let inv = sample_inv_gauss(4.0 / r, shape, rng).map_err(|e| e.at("v", it))?;
            self.v[i] = 1.0 / inv;
        }

        let fit: f64 = resid
            .iter()
            .zip(self.v.iter())
            .map(|(r, v)| r * r / (16.0 * v))
            .sum();
        let quad: f64 = self
            .beta
            .iter()
            .zip(self.tau2.iter())
            .map(|(b, t)| b * b / t)
            .sum();
        let rate = fit + self.v.sum() + 0.5 * quad;
        self.sigma =
            sample_inv_gamma(1.5 * n + 0.5 * p, rate, rng).map_err(|e| e.at("sigma", it))?;

        self.tau2 =
            draw_tau2(&self.beta, self.lambda2, self.sigma, rng).map_err(|e| e.at("tau2", it))?;
        if self.hyper.lambda_mode == LambdaMode::Learned {
            self.lambda2 =
                update_lambda2(&self.tau2, &self.hyper, rng).map_err(|e| e.at("lambda2", it))?;
        }
        Ok(())
    }

    fn record(&self, row: &mut Vec<f64>, rng: &mut RngStream) {
        let data = &self.centered.data;
        let resid = &data.y - &data.x * &self.beta;
        let w = self.v.map(|v| 1.0 / (8.0 * self.sigma * v));
        row.push(draw_intercept(&self.centered, &self.beta, &resid, &w, rng));
        row.extend(self.beta.iter());
        row.extend([self.sigma, self.lambda2]);
        if self.store_full {
            row.extend(self.tau2.iter());
            row.extend(self.v.iter());
        }
    }
}

/// Student-t lasso: `y_i ~ N(x_i' beta, sigma2 omega_i)`,
/// `omega_i ~ IG(nu/2, nu/2)` with `nu = 3`, and the Bayesian lasso prior.
struct TblChain {
    centered: CenteredData,
    beta: DVector<f64>,
    tau2: DVector<f64>,
    omega: DVector<f64>,
    sigma2: f64,
    lambda2: f64,
    hyper: Hyperparams,
    store_full: bool,
}

impl Chain for TblChain {
    fn names(&self) -> Vec<String> {
        let mut names = coefficient_names(self.beta.len());
        names.extend(["sigma2", "lambda2"].map(String::from));
        if self.store_full {
            names.extend((1..=self.tau2.len()).map(|j| format!("tau2_{j}")));
            names.extend((1..=self.omega.len()).map(|i| format!("omega_{i}")));
        }
        names
    }

    fn sweep(&mut self, it: usize, rng: &mut RngStream) -> Result<()> {
        let data = &self.centered.data;
        let n = data.n() as f64;
        let p = data.p() as f64;

        let w = self.omega.map(|o| 1.0 / (self.sigma2 * o));
        let prior = self.tau2.map(|t| 1.0 / (self.sigma2 * t));
        self.beta = draw_gaussian_coefficients(data, None, &w, Some(&prior), rng)
            .map_err(|e| e.at("beta", it))?;

        let resid = &data.y - &data.x * &self.beta;
        for i in 0..self.omega.len() {
            let rate = 0.5 * (TBL_DOF + resid[i] * resid[i] / self.sigma2);
            self.omega[i] = sample_inv_gamma(0.5 * (TBL_DOF + 1.0), rate, rng)
                .map_err(|e| e.at("omega", it))?;
        }

        let fit: f64 = resid
            .iter()
            .zip(self.omega.iter())
            .map(|(r, o)| r * r / o)
            .sum();
        let quad: f64 = self
            .beta
            .iter()
            .zip(self.tau2.iter())
            .map(|(b, t)| b * b / t)
            .sum();
        let shape = 0.5 * (n - 1.0) + 0.5 * p;
        self.sigma2 =
            sample_inv_gamma(shape, 0.5 * fit + 0.5 * quad, rng).map_err(|e| e.at("sigma2", it))?;

        self.tau2 =
            draw_tau2(&self.beta, self.lambda2, self.sigma2, rng).map_err(|e| e.at("tau2", it))?;
        if self.hyper.lambda_mode == LambdaMode::Learned {
            self.lambda2 =
                update_lambda2(&self.tau2, &self.hyper, rng).map_err(|e| e.at("lambda2", it))?;
        }
        Ok(())
    }

    fn record(&self, row: &mut Vec<f64>, rng: &mut RngStream) {
        let data = &self.centered.data;
        let resid = &data.y - &data.x * &self.beta;
        let w = self.omega.map(|o| 1.0 / (self.sigma2 * o));
        row.push(draw_intercept(&self.centered, &self.beta, &resid, &w, rng));
        row.extend(self.beta.iter());
        row.extend([self.sigma2, self.lambda2]);
        if self.store_full {
            row.extend(self.tau2.iter());
            row.extend(self.omega.iter());
        }
    }
}

/// Runs one of the baseline samplers.
pub fn run_baseline(
    kind: SamplerKind,
    data: &Dataset,
    config: &FitConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let centered = CenteredData::new(data);
    let (beta, s2) = ridge_start(&centered.data)?;
    let p = data.p();
    let n = data.n();
    let hyper = config.hyper;
    let lambda2 = match hyper.lambda_mode {
        LambdaMode::Fixed(l) => l * l,
        LambdaMode::Learned => 1.0,
    };
    let tau2 = DVector::from_element(p, 1.0);
    let store_full = config.store_full_state;
    let mut rng = config.rng();
    match kind {
        SamplerKind::Bl => {
            let gram = centered.data.x.tr_mul(&centered.data.x);
            let mut chain = BlChain {
                centered,
                gram,
                beta,
                tau2,
                sigma2: s2,
                lambda2,
                hyper,
                store_full,
            };
            drive(&mut chain, config, &mut rng)
        }
        SamplerKind::Mbl => {
            // E|e| = sigma for the median-regression likelihood at this scale
            let sigma = (s2.sqrt() / std::f64::consts::SQRT_2).max(1e-6);
            let mut chain = MblChain {
                centered,
                beta,
                tau2,
                v: DVector::from_element(n, sigma),
                sigma,
                lambda2,
                hyper,
                store_full,
            };
            drive(&mut chain, config, &mut rng)
        }
        SamplerKind::Tbl => {
            let mut chain = TblChain {
                centered,
                beta,
                tau2,
                omega: DVector::from_element(n, 1.0),
                sigma2: s2,
                lambda2,
                hyper,
                store_full,
            };
            drive(&mut chain, config, &mut rng)
        }
        other => Err(HblError::InvalidConfig(format!(
            "{} is not a baseline sampler",
            other.label()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data(n: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed, 99);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.std_normal());
        let truth = DVector::from_vec(vec![2.0, 0.0, -1.0]);
        let y = &x * &truth + DVector::from_fn(n, |_, _| 0.5 * rng.std_normal());
        Dataset::new(y.add_scalar(1.0), x).unwrap()
    }

    #[test]
    fn stored_draw_count() {
        let d = line_data(30, 1);
        let cfg = FitConfig::new(SamplerKind::Hbl, 10, 5, 3);
        assert_eq!(run_chain(&d, &cfg).unwrap().len(), 5);
        let mut cfg = FitConfig::new(SamplerKind::Bl, 20, 5, 3);
        cfg.thin = 4;
        assert_eq!(run_chain(&d, &cfg).unwrap().len(), 3);
    }

    #[test]
    fn invalid_configs_rejected() {
        let d = line_data(10, 1);
        assert!(run_chain(&d, &FitConfig::new(SamplerKind::Hbl, 10, 10, 1)).is_err());
        assert!(run_chain(&d, &FitConfig::new(SamplerKind::HblFixedEta, 10, 1, 1)).is_err());
    }

    #[test]
    fn reproducible_under_seed() {
        let d = line_data(25, 2);
        for kind in [
            SamplerKind::Hbl,
            SamplerKind::Bl,
            SamplerKind::Mbl,
            SamplerKind::Tbl,
        ] {
            let cfg = FitConfig::new(kind, 60, 10, 17);
            let a = run_chain(&d, &cfg).unwrap();
            let b = run_chain(&d, &cfg).unwrap();
            assert_eq!(a.draws, b.draws, "{kind:?}");
        }
    }

    #[test]
    fn fixed_blocks_stay_fixed() {
        let d = line_data(20, 4);
        let cfg = FitConfig::new(SamplerKind::HblFixedEta, 50, 0, 5)
            .with_eta(EtaMode::Fixed(0.7))
            .with_lambda(LambdaMode::Fixed(2.0));
        let s = run_chain(&d, &cfg).unwrap();
        assert!(s.column("eta").unwrap().iter().all(|&e| e == 0.7));
        assert!(s.column("lambda2").unwrap().iter().all(|&l| l == 4.0));
        assert_eq!(s.fixed_point.calls, 0);
    }

    #[test]
    fn all_samplers_recover_a_clean_line() {
        let d = line_data(200, 6);
        for kind in [
            SamplerKind::Hbl,
            SamplerKind::Bl,
            SamplerKind::Mbl,
            SamplerKind::Tbl,
        ] {
            let s = run_chain(&d, &FitConfig::new(kind, 1500, 500, 8)).unwrap();
            let coef = s.coefficient_draws();
            let means: Vec<f64> = (0..4).map(|j| coef.column(j).mean()).collect();
            let truth = [1.0, 2.0, 0.0, -1.0];
            for j in 0..4 {
                assert!(
                    (means[j] - truth[j]).abs() < 0.15,
                    "{kind:?} coef {j}: {}",
                    means[j]
                );
            }
        }
    }

    #[test]
    fn full_state_storage() {
        let d = line_data(12, 3);
        let mut cfg = FitConfig::new(SamplerKind::Hbl, 20, 10, 1);
        cfg.store_full_state = true;
        let s = run_chain(&d, &cfg).unwrap();
        assert_eq!(s.names.len(), 4 + 3 + 3 + 12);
        assert!(s.index_of("sigma2_12").is_some());
    }
}
