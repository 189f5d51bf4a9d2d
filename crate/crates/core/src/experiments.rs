//! Synthetic data generators and the simulation harnesses: the four
//! regression scenarios, hyperparameter sensitivity, the multimodality demo
//! and CPU timing.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::diagnostics::{median, sim_metrics, summarize};
use crate::error::{HblError, Result};
use crate::gibbs::{run_chain, run_unconditional_prior_chain, FitConfig, SamplerKind};
use crate::model::{Dataset, EtaMode, Hyperparams, LambdaMode};
use crate::rng_dist::{sample_exp, sample_hyperbolic, RngStream};

/// Standard deviation of the contaminated normal `0.9 N(0,1) + 0.1 N(0,225)`
/// as used to normalize the large-outlier noise.
pub const CONTAMINATED_SD: f64 = 4.83;

const DATA_DOMAIN: u32 = 0xda7a;
const CHAIN_DOMAIN: u32 = 0xc4a1;

/// One of the four simulation scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub model_id: u8,
    pub n: usize,
    pub p: usize,
    pub r: f64,
    pub sigma: f64,
    /// Intercept followed by the p slopes.
    pub beta_truth: DVector<f64>,
    pub replications: usize,
    pub seed: u64,
}

/// Intercept 1 and slopes 3, 0.5, 1, 1.5, 1 at positions 1, 2, 4, 7, 11.
pub fn paper_truth(p: usize) -> DVector<f64> {
    let mut b = DVector::zeros(p + 1);
    b[0] = 1.0;
    for (j, v) in [(1, 3.0), (2, 0.5), (4, 1.0), (7, 1.5), (11, 1.0)] {
        if j <= p {
            b[j] = v;
        }
    }
    b
}

impl ScenarioSpec {
    /// Scenario `model_id` with p = 20: Gaussian noise with r = 0.5 (1) or
    /// r = 0.95 (2), contaminated normal (3) or Laplace (4) noise with r = 0.5.
    pub fn paper(model_id: u8, n: usize, replications: usize, seed: u64) -> Result<Self> {
        let (r, sigma) = match model_id {
            1 => (0.5, 2.0),
            2 => (0.95, 2.0),
            3 | 4 => (0.5, 9.67),
            other => return Err(HblError::UnknownModel(other)),
        };
        Ok(ScenarioSpec {
            model_id,
            n,
            p: 20,
            r,
            sigma,
            beta_truth: paper_truth(20),
            replications,
            seed,
        })
    }

    fn stream_index(&self, rep: usize) -> u32 {
        // model (4 bits) | n (12 bits) | rep (16 bits)
        (u32::from(self.model_id) << 28) | ((self.n as u32 & 0xfff) << 16) | (rep as u32 & 0xffff)
    }
}

/// Rows of `N_p(0, Sigma)` with `Sigma_ij = r^|i-j|`, built as a stationary
/// AR(1) across columns.
pub fn ar1_design(n: usize, p: usize, r: f64, rng: &mut RngStream) -> DMatrix<f64> {
    let innov = (1.0 - r * r).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = rng.std_normal();
        x[(i, 0)] = prev;
        for j in 1..p {
            prev = r * prev + innov * rng.std_normal();
            x[(i, j)] = prev;
        }
    }
    x
}

/// Unit-variance noise draw for the given scenario.
pub fn scenario_noise(model_id: u8, rng: &mut RngStream) -> Result<f64> {
    match model_id {
        1 | 2 => Ok(rng.std_normal()),
        3 => {
            let sd = if rng.uniform() < 0.9 { 1.0 } else { 15.0 };
            Ok(sd * rng.std_normal() / CONTAMINATED_SD)
        }
        4 => {
            let magnitude = sample_exp(1.0, rng)?;
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            Ok(sign * magnitude / std::f64::consts::SQRT_2)
        }
        other => Err(HblError::UnknownModel(other)),
    }
}

/// Data set `rep` of a scenario and its true coefficients.
pub fn gen_scenario(spec: &ScenarioSpec, rep: usize) -> Result<(Dataset, DVector<f64>)> {
    if !(spec.r.abs() < 1.0) {
        return Err(HblError::InvalidConfig(format!(
            "AR correlation {} not in (-1, 1)",
            spec.r
        )));
    }
    if spec.beta_truth.len() != spec.p + 1 {
        return Err(HblError::DimensionMismatch {
            expected: spec.p + 1,
            got: spec.beta_truth.len(),
        });
    }
    let mut rng = RngStream::derived(spec.seed, DATA_DOMAIN, spec.stream_index(rep));
    let x = ar1_design(spec.n, spec.p, spec.r, &mut rng);
    let slopes = spec.beta_truth.rows(1, spec.p);
    let mut y = &x * slopes;
    for i in 0..spec.n {
        y[i] += spec.beta_truth[0] + spec.sigma * scenario_noise(spec.model_id, &mut rng)?;
    }
    Ok((Dataset::new(y, x)?, spec.beta_truth.clone()))
}

/// Chain settings shared by every replication of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub hyper: Hyperparams,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            iterations: 2500,
            burn_in: 500,
            hyper: Hyperparams::default(),
        }
    }
}

/// Averages over replications for one (scenario, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: SamplerKind,
    pub model_id: u8,
    pub n: usize,
    pub rmse: f64,
    pub al: f64,
    pub cp: f64,
    pub completed: usize,
    pub failed: usize,
    /// Posterior median of `eta` per completed replication (HBL only).
    pub eta_medians: Vec<f64>,
}

struct RepOutcome {
    rmse: f64,
    al: f64,
    cp: f64,
    eta_median: Option<f64>,
}

fn method_index(kind: SamplerKind) -> u32 {
    match kind {
        SamplerKind::Hbl => 0,
        SamplerKind::HblFixedEta => 1,
        SamplerKind::Bl => 2,
        SamplerKind::Mbl => 3,
        SamplerKind::Tbl => 4,
        SamplerKind::HblUnconditionalPrior => 5,
    }
}

fn run_replication(
    spec: &ScenarioSpec,
    rep: usize,
    method: SamplerKind,
    study: &StudyConfig,
) -> Result<RepOutcome> {
    let (data, truth) = gen_scenario(spec, rep)?;
    let mut cfg = FitConfig::new(method, study.iterations, study.burn_in, spec.seed);
    cfg.hyper = study.hyper;
    cfg.stream_id =
        (u64::from(CHAIN_DOMAIN + method_index(method)) << 32) | u64::from(spec.stream_index(rep));
    let samples = run_chain(&data, &cfg)?;
    let summary = summarize(&samples)?;
    let m = sim_metrics(
        &summary.coefficient_medians(),
        &truth,
        &summary.coefficient_intervals(),
    )?;
    Ok(RepOutcome {
        rmse: m.rmse,
        al: m.al,
        cp: m.cp,
        eta_median: summary.get("eta").map(|p| p.median),
    })
}

/// Runs every method on every replication of every scenario (in parallel
/// over replications) and averages RMSE, AL and CP. Failed replications are
/// logged, counted and left out of the averages.
pub fn run_simulation_study(
    specs: &[ScenarioSpec],
    methods: &[SamplerKind],
    study: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for spec in specs {
        for &method in methods {
            let outcomes: Vec<Result<RepOutcome>> = (0..spec.replications)
                .into_par_iter()
                .map(|rep| run_replication(spec, rep, method, study))
                .collect();
            let mut ok = Vec::new();
            let mut failed = 0;
            for (rep, o) in outcomes.into_iter().enumerate() {
                match o {
                    Ok(v) => ok.push(v),
                    Err(e) => {
                        log::warn!(
                            "model {} n={} rep {rep} {}: {e}",
                            spec.model_id,
                            spec.n,
                            method.label()
                        );
                        failed += 1;
                    }
                }
            }
            let k = ok.len().max(1) as f64;
            rows.push(StudyRow {
                method,
                model_id: spec.model_id,
                n: spec.n,
                rmse: ok.iter().map(|o| o.rmse).sum::<f64>() / k,
                al: ok.iter().map(|o| o.al).sum::<f64>() / k,
                cp: ok.iter().map(|o| o.cp).sum::<f64>() / k,
                completed: ok.len(),
                failed,
                eta_medians: ok.iter().filter_map(|o| o.eta_median).collect(),
            });
        }
    }
    Ok(rows)
}

/// The four sigmoid features of the sensitivity example at point `t`.
pub fn sigmoid_features(t: f64) -> [f64; 4] {
    let s = |z: f64| 1.0 / (1.0 + z.exp());
    [
        s(-4.0 * (t - 0.3)),
        s(3.0 * (t - 0.2)),
        s(-4.0 * (t - 0.7)),
        s(5.0 * (t - 0.8)),
    ]
}

/// Which gamma hyperparameter a sensitivity setting varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperName {
    A,
    B,
    C,
    D,
}

impl HyperName {
    pub fn label(&self) -> &'static str {
        match self {
            HyperName::A => "a",
            HyperName::B => "b",
            HyperName::C => "c",
            HyperName::D => "d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityConfig {
    pub points: usize,
    pub sigma: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            points: 50,
            sigma: 0.03,
            values: vec![0.1, 1.0, 10.0],
            iterations: 4000,
            burn_in: 1000,
            seed: 1,
        }
    }
}

/// Fitted curve `yhat_i = bhat0 + x_i' bhat` (posterior means) for one
/// hyperparameter setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    pub varied: HyperName,
    pub value: f64,
    pub yhat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub truth: Vec<f64>,
    pub curves: Vec<SensitivityCurve>,
}

/// Sensitivity data: `t` on an equispaced grid over [-2, 2], sigmoid
/// features, unit coefficients, hyperbolic noise scaled by `sigma`.
pub fn sensitivity_data(
    points: usize,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Dataset, Vec<f64>)> {
    let t: Vec<f64> = (0..points)
        .map(|i| -2.0 + 4.0 * i as f64 / (points - 1) as f64)
        .collect();
    let x = DMatrix::from_fn(points, 4, |i, j| sigmoid_features(t[i])[j]);
    let truth: Vec<f64> = (0..points).map(|i| x.row(i).sum()).collect();
    let mut y = DVector::zeros(points);
    for i in 0..points {
        y[i] = truth[i] + sigma * sample_hyperbolic(1.0, 1.0, rng)?;
    }
    Ok((t, Dataset::new(y, x)?, truth))
}

/// Fits the learned-`eta` sampler once per setting, varying one of a, b, c, d
/// over `values` with the other three at 1.
pub fn run_sensitivity(config: &SensitivityConfig) -> Result<SensitivityResult> {
    let mut rng = RngStream::derived(config.seed, DATA_DOMAIN, 0x5e45);
    let (t, data, truth) = sensitivity_data(config.points, config.sigma, &mut rng)?;
    let mut settings = Vec::new();
    for name in [HyperName::A, HyperName::B, HyperName::C, HyperName::D] {
        for &v in &config.values {
            settings.push((name, v));
        }
    }
    let curves = settings
        .par_iter()
        .enumerate()
        .map(|(k, &(name, value))| {
            let mut cfg = FitConfig::new(
                SamplerKind::Hbl,
                config.iterations,
                config.burn_in,
                config.seed,
            );
            cfg.stream_id = k as u64;
            match name {
                HyperName::A => cfg.hyper.a = value,
                HyperName::B => cfg.hyper.b = value,
                HyperName::C => cfg.hyper.c = value,
                HyperName::D => cfg.hyper.d = value,
            }
            let samples = run_chain(&data, &cfg)?;
            let coef = samples.coefficient_draws();
            let means = DVector::from_fn(coef.ncols(), |j, _| coef.column(j).mean());
            let yhat = (0..data.n())
                .map(|i| means[0] + (data.x.row(i) * means.rows(1, data.p()))[0])
                .collect();
            Ok(SensitivityCurve {
                varied: name,
                value,
                yhat,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SensitivityResult {
        t,
        y: data.y.iter().copied().collect(),
        truth,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalConfig {
    pub n: usize,
    pub sigma: f64,
    pub beta: [f64; 2],
    pub lambda: f64,
    pub eta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub grid_size: usize,
    pub seed: u64,
}

impl Default for MultimodalConfig {
    fn default() -> Self {
        MultimodalConfig {
            n: 4,
            sigma: 0.03,
            beta: [0.0, 5.0],
            lambda: 3.0,
            eta: 1.0,
            iterations: 60_000,
            burn_in: 5_000,
            grid_size: 60,
            seed: 1,
        }
    }
}

/// Kernel density estimate of a set of 2-D points evaluated on a regular
/// grid, with Gaussian kernels and Silverman bandwidths per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    /// `density[i][j]` at `(x_axis[i], y_axis[j])`.
    pub density: Vec<Vec<f64>>,
    pub bandwidth: (f64, f64),
}

/// Heights below this fraction of the global maximum are not counted as
/// modes.
pub const MODE_FLOOR: f64 = 0.05;

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

impl DensityGrid {
    /// Grid spanning the 0.5% to 99.5% range of each coordinate, padded by
    /// three bandwidths. Bandwidth `sd * S^(-1/6)` per axis.
    pub fn from_points(xs: &[f64], ys: &[f64], size: usize) -> DensityGrid {
        let s = xs.len() as f64;
        let hx = (sd(xs) * s.powf(-1.0 / 6.0)).max(1e-12);
        let hy = (sd(ys) * s.powf(-1.0 / 6.0)).max(1e-12);
        let axis = |v: &[f64], h: f64| {
            let mut sorted = v.to_vec();
            sorted.sort_by(f64::total_cmp);
            let lo = crate::diagnostics::quantile_sorted(&sorted, 0.005) - 3.0 * h;
            let hi = crate::diagnostics::quantile_sorted(&sorted, 0.995) + 3.0 * h;
            (0..size)
                .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
                .collect::<Vec<f64>>()
        };
        let x_axis = axis(xs, hx);
        let y_axis = axis(ys, hy);
        let norm = 1.0 / (2.0 * std::f64::consts::PI * hx * hy * s);
        let density = x_axis
            .par_iter()
            .map(|&gx| {
                y_axis
                    .iter()
                    .map(|&gy| {
                        xs.iter()
                            .zip(ys)
                            .map(|(x, y)| {
                                let u = (gx - x) / hx;
                                let v = (gy - y) / hy;
                                (-0.5 * (u * u + v * v)).exp()
                            })
                            .sum::<f64>()
                            * norm
                    })
                    .collect()
            })
            .collect();
        DensityGrid {
            x_axis,
            y_axis,
            density,
            bandwidth: (hx, hy),
        }
    }

    /// Grid points higher than all eight neighbours and at least
    /// [`MODE_FLOOR`] times the global maximum.
    pub fn modes(&self) -> Vec<(f64, f64)> {
        count_local_maxima(&self.density, MODE_FLOOR)
            .into_iter()
            .map(|(i, j)| (self.x_axis[i], self.y_axis[j]))
            .collect()
    }
}

/// Indices of strict local maxima (8-neighbourhood) of a 2-D array whose
/// height is at least `floor` times the global maximum.
pub fn count_local_maxima(z: &[Vec<f64>], floor: f64) -> Vec<(usize, usize)> {
    let nx = z.len();
    let ny = z.first().map_or(0, Vec::len);
    let top = z
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let v = z[i][j];
            if v < floor * top {
                continue;
            }
            let mut is_max = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    if z[a as usize][b as usize] >= v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoPosterior {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub log_rho: Vec<f64>,
    pub grid: DensityGrid,
    pub mode_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalResult {
    pub data: Dataset,
    pub unconditional: DemoPosterior,
    pub conditional: DemoPosterior,
}

/// Two-covariate demo data: centered standard-normal design rescaled so
/// that `tr(X^T X) = 1`, `y = X beta + sigma e` with hyperbolic `e`, then
/// centered.
pub fn multimodal_data(config: &MultimodalConfig, rng: &mut RngStream) -> Result<Dataset> {
    let n = config.n;
    let mut x = DMatrix::from_fn(n, 2, |_, _| rng.std_normal());
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let tr = x.norm_squared();
    x /= tr.sqrt();
    let beta = DVector::from_row_slice(&config.beta);
    let mut y = &x * beta;
    for i in 0..n {
        y[i] += config.sigma * sample_hyperbolic(1.0, 1.0, rng)?;
    }
    // centered so that the no-intercept model and the sampler agree
    let ym = y.mean();
    y.add_scalar_mut(-ym);
    Dataset::new(y, x)
}

fn demo_posterior(samples: &crate::model::PosteriorSamples, grid_size: usize) -> DemoPosterior {
    let col = |name: &str| -> Vec<f64> {
        samples
            .column(name)
            .map(|c| c.iter().copied().collect())
            .unwrap_or_default()
    };
    let beta1 = col("beta1");
    let beta2 = col("beta2");
    let log_rho = col("rho2").iter().map(|r| 0.5 * r.ln()).collect();
    let grid = DensityGrid::from_points(&beta1, &beta2, grid_size);
    let mode_count = grid.modes().len();
    DemoPosterior {
        beta1,
        beta2,
        log_rho,
        grid,
        mode_count,
    }
}

/// Fits the fixed-`(lambda, eta)` sampler under the unconditional and the
/// conditional coefficient prior on the same demo data and smooths the
/// joint draws of `(beta1, beta2)`.
pub fn run_multimodality_demo(config: &MultimodalConfig) -> Result<MultimodalResult> {
    let mut rng = RngStream::derived(config.seed, DATA_DOMAIN, 0xd3);
    let data = multimodal_data(config, &mut rng)?;
    let base = FitConfig::new(
        SamplerKind::HblFixedEta,
        config.iterations,
        config.burn_in,
        config.seed,
    )
    .with_eta(EtaMode::Fixed(config.eta))
    .with_lambda(LambdaMode::Fixed(config.lambda));
    let mut uncond_cfg = base.clone();
    uncond_cfg.stream_id = 1;
    let (uncond, cond) = rayon::join(
        || run_unconditional_prior_chain(&data, &uncond_cfg, config.lambda, config.eta),
        || run_chain(&data, &base),
    );
    Ok(MultimodalResult {
        unconditional: demo_posterior(&uncond?, config.grid_size),
        conditional: demo_posterior(&cond?, config.grid_size),
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub n: usize,
    pub p_grid: Vec<usize>,
    pub methods: Vec<SamplerKind>,
    pub iterations: usize,
    pub burn_in: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n: 200,
            p_grid: vec![5, 10, 20, 50, 100],
            methods: vec![
                SamplerKind::Bl,
                SamplerKind::Mbl,
                SamplerKind::Tbl,
                SamplerKind::Hbl,
            ],
            iterations: 15_000,
            burn_in: 5_000,
            runs: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: SamplerKind,
    pub p: usize,
    pub seconds: f64,
}

/// Scenario-1 style data with slopes (3, 0.5, 1, 1.5, 1, 0, ...).
pub fn timing_data(n: usize, p: usize, rng: &mut RngStream) -> Result<Dataset> {
    let x = ar1_design(n, p, 0.5, rng);
    let mut beta = DVector::zeros(p);
    for (j, v) in [3.0, 0.5, 1.0, 1.5, 1.0].into_iter().enumerate() {
        if j < p {
            beta[j] = v;
        }
    }
    let y = &x * beta + DVector::from_fn(n, |_, _| 2.0 * rng.std_normal());
    Dataset::new(y.add_scalar(1.0), x)
}

/// Wall-clock seconds per chain, averaged over `runs`, for every method and
/// dimension. Runs are sequential so that timings do not compete for cores.
pub fn run_timing(config: &TimingConfig) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &p in &config.p_grid {
        let mut rng = RngStream::derived(config.seed, DATA_DOMAIN, 0x7100 + p as u32);
        let data = timing_data(config.n, p, &mut rng)?;
        for &method in &config.methods {
            let mut total = 0.0;
            for run in 0..config.runs {
                let mut cfg =
                    FitConfig::new(method, config.iterations, config.burn_in, config.seed);
                cfg.stream_id = run as u64;
                let start = Instant::now();
                run_chain(&data, &cfg)?;
                total += start.elapsed().as_secs_f64();
            }
            rows.push(TimingRow {
                method,
                p,
                seconds: total / config.runs.max(1) as f64,
            });
        }
    }
    Ok(rows)
}

/// Median of the per-replication `eta` medians of a study row.
pub fn median_eta(row: &StudyRow) -> Option<f64> {
    if row.eta_medians.is_empty() {
        None
    } else {
        Some(median(&row.eta_medians))
    }
}
