//! Data, hyperparameters, chain state, posterior draws and the loss functions.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{positive, HblError, Result};

/// Tolerance used when checking whether a dataset is already centered.
const CENTER_TOL: f64 = 1e-10;

/// Regression data: response `y` (length n) and design `x` (n x p).
///
/// `y_center`, `y_scale`, `x_centers` and `x_scales` record the affine maps
/// applied by [`Dataset::standardize`] so that coefficients can be mapped back
/// to the original units. A raw dataset has centers 0 and scales 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub standardized: bool,
    pub y_center: f64,
    pub y_scale: f64,
    pub x_centers: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub response_name: String,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let p = x.ncols();
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Dataset::with_names(y, x, "y".to_string(), names)
    }

    pub fn with_names(
        y: DVector<f64>,
        x: DMatrix<f64>,
        response_name: String,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if y.is_empty() || x.ncols() == 0 {
            return Err(HblError::InvalidConfig(
                "dataset needs at least one row and one covariate".into(),
            ));
        }
        if x.nrows() != y.len() {
            return Err(HblError::DimensionMismatch {
                expected: y.len(),
                got: x.nrows(),
            });
        }
        if column_names.len() != x.ncols() {
            return Err(HblError::DimensionMismatch {
                expected: x.ncols(),
                got: column_names.len(),
            });
        }
        if let Some(v) = y.iter().chain(x.iter()).find(|v| !v.is_finite()) {
            return Err(HblError::Domain {
                what: "dataset entry",
                value: *v,
            });
        }
        let p = x.ncols();
        Ok(Dataset {
            y,
            x,
            standardized: false,
            y_center: 0.0,
            y_scale: 1.0,
            x_centers: vec![0.0; p],
            x_scales: vec![1.0; p],
            response_name,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Column means of `x` and the mean of `y`.
    pub fn means(&self) -> (f64, DVector<f64>) {
        let n = self.n() as f64;
        let xm = DVector::from_iterator(self.p(), self.x.column_iter().map(|c| c.sum() / n));
        (self.y.mean(), xm)
    }

    pub fn is_centered(&self) -> bool {
        let (ym, xm) = self.means();
        ym.abs() < CENTER_TOL && xm.iter().all(|m| m.abs() < CENTER_TOL)
    }

    /// Copy with `y` and every column of `x` shifted to mean zero. The
    /// recorded centers and scales are left untouched.
    pub fn centered(&self) -> Dataset {
        let (ym, xm) = self.means();
        let mut out = self.clone();
        out.y.add_scalar_mut(-ym);
        for (j, mut col) in out.x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-xm[j]);
        }
        out
    }

    /// Centers and scales `y` and every column of `x` to mean 0 and sample
    /// variance 1 (divisor n - 1).
    pub fn standardize(&self) -> Result<Dataset> {
        if self.n() < 2 {
            return Err(HblError::InsufficientSamples {
                needed: 2,
                got: self.n(),
            });
        }
        let (ym, ys) = mean_sd(self.y.as_slice());
        if !(ys > 0.0) {
            return Err(HblError::ZeroVariance(self.response_name.clone()));
        }
        let mut out = self.clone();
        out.y = self.y.map(|v| (v - ym) / ys);
        out.y_center = self.y_center + self.y_scale * ym;
        out.y_scale = self.y_scale * ys;
        for j in 0..self.p() {
            let col: Vec<f64> = self.x.column(j).iter().copied().collect();
            let (m, s) = mean_sd(&col);
            if !(s > 0.0) {
                return Err(HblError::ZeroVariance(self.column_names[j].clone()));
            }
            for i in 0..self.n() {
                out.x[(i, j)] = (self.x[(i, j)] - m) / s;
            }
            out.x_centers[j] = self.x_centers[j] + self.x_scales[j] * m;
            out.x_scales[j] = self.x_scales[j] * s;
        }
        out.standardized = true;
        Ok(out)
    }

    /// Maps an intercept and slopes fitted on this dataset back to the units
    /// of the original (pre-standardization) data.
    pub fn back_transform(&self, intercept: f64, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let slopes = DVector::from_fn(self.p(), |j, _| self.y_scale * beta[j] / self.x_scales[j]);
        let shift: f64 = (0..self.p()).map(|j| slopes[j] * self.x_centers[j]).sum();
        (self.y_center + self.y_scale * intercept - shift, slopes)
    }

    /// Copy without row `i`.
    pub fn without_row(&self, i: usize) -> Dataset {
        let mut out = self.clone();
        out.y = self.y.clone().remove_row(i);
        out.x = self.x.clone().remove_row(i);
        out
    }

    /// Copy with rows rearranged so that row `k` of the result is row
    /// `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Dataset {
        let mut out = self.clone();
        out.y = DVector::from_fn(order.len(), |k, _| self.y[order[k]]);
        out.x = DMatrix::from_fn(order.len(), self.p(), |k, j| self.x[(order[k], j)]);
        out
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode {
    Fixed(f64),
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Fixed(f64),
    Learned,
}

/// Prior and algorithm constants: `lambda^2 ~ Ga(a, b)`, `eta ~ Ga(c, d)`,
/// and the iteration cap / tolerance of the `eta` fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eta_mode: EtaMode,
    pub lambda_mode: LambdaMode,
    pub fp_max_iter: usize,
    pub fp_tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
            eta_mode: EtaMode::Learned,
            lambda_mode: LambdaMode::Learned,
            fp_max_iter: 10,
            fp_tol: 1e-8,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        positive("hyperparameter a", self.a)?;
        positive("hyperparameter b", self.b)?;
        positive("hyperparameter c", self.c)?;
        positive("hyperparameter d", self.d)?;
        positive("fixed-point tolerance", self.fp_tol)?;
        if self.fp_max_iter == 0 {
            return Err(HblError::InvalidConfig(
                "fixed-point iteration cap must be positive".into(),
            ));
        }
        if let EtaMode::Fixed(eta) = self.eta_mode {
            positive("fixed eta", eta)?;
        }
        if let LambdaMode::Fixed(lambda) = self.lambda_mode {
            positive("fixed lambda", lambda)?;
        }
        Ok(())
    }
}

/// Current values of every block of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    pub tau2: DVector<f64>,
    pub sigma2: DVector<f64>,
    pub rho2: f64,
    pub lambda2: f64,
    pub eta: f64,
}

impl ChainState {
    /// Starting point: ridge coefficients `(X^T X + I)^-1 X^T y`, unit local
    /// scales, `rho2` equal to the residual sample variance.
    pub fn initial(data: &Dataset, hyper: &Hyperparams) -> Result<Self> {
        let n = data.n();
        let p = data.p();
        let mut gram = data.x.tr_mul(&data.x);
        for j in 0..p {
            gram[(j, j)] += 1.0;
        }
        let beta = gram
            .cholesky()
            .ok_or(HblError::NotPositiveDefinite {
                context: "ridge initialization",
            })?
            .solve(&data.x.tr_mul(&data.y));
        let resid = &data.y - &data.x * &beta;
        let rho2 = if n > 1 {
            let (_, sd) = mean_sd(resid.as_slice());
            sd * sd
        } else {
            0.0
        };
        let rho2 = if rho2.is_finite() && rho2 > 1e-12 {
            rho2
        } else {
            1.0
        };
        let eta = match hyper.eta_mode {
            EtaMode::Fixed(e) => e,
            EtaMode::Learned => 1.0,
        };
        let lambda2 = match hyper.lambda_mode {
            LambdaMode::Fixed(l) => l * l,
            LambdaMode::Learned => 1.0,
        };
        Ok(ChainState {
            beta,
            tau2: DVector::from_element(p, 1.0),
            sigma2: DVector::from_element(n, 1.0),
            rho2,
            lambda2,
            eta,
        })
    }

    /// True when every scale is finite and strictly positive and `beta` is
    /// finite.
    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        self.beta.iter().all(|b| b.is_finite())
            && self.tau2.iter().all(|&v| pos(v))
            && self.sigma2.iter().all(|&v| pos(v))
            && pos(self.rho2)
            && pos(self.lambda2)
            && pos(self.eta)
    }
}

/// Counters for the gamma fixed-point step of the learned-`eta` sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FixedPointStats {
    pub calls: usize,
    pub converged: usize,
    pub total_iterations: usize,
}

impl FixedPointStats {
    pub fn convergence_rate(&self) -> f64 {
        if self.calls == 0 {
            1.0
        } else {
            self.converged as f64 / self.calls as f64
        }
    }
}

/// Stored post-burn-in draws, one row per retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub draws: DMatrix<f64>,
    pub names: Vec<String>,
    pub burn_in: usize,
    pub thin: usize,
    pub fixed_point: FixedPointStats,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<DVectorView<'_, f64>> {
        self.index_of(name).map(|j| self.draws.column(j))
    }

    /// Draws of the intercept followed by the p slopes, as an S x (p+1)
    /// matrix.
    pub fn coefficient_draws(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| is_coefficient_name(n))
            .map(|(j, _)| j)
            .collect();
        self.draws.select_columns(cols.iter())
    }

    /// Posterior mean of the slopes (intercept excluded).
    pub fn slope_means(&self) -> DVector<f64> {
        let coef = self.coefficient_draws();
        DVector::from_fn(coef.ncols() - 1, |j, _| coef.column(j + 1).mean())
    }
}

pub(crate) fn coefficient_names(p: usize) -> Vec<String> {
    (0..=p).map(|j| format!("beta{j}")).collect()
}

fn is_coefficient_name(name: &str) -> bool {
    name.strip_prefix("beta")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Hyperbolic loss `sqrt(eta (eta + x^2 / rho2)) - eta`.
pub fn hyperbolic_loss(x: f64, eta: f64, rho2: f64) -> f64 {
    // eta * (sqrt(1 + t) - 1) rewritten to avoid cancellation for small t
    let t = x * x / (eta * rho2);
    eta * t / ((1.0 + t).sqrt() + 1.0)
}

/// Pseudo-Huber loss `c sqrt(c^2 + x^2) - c^2`.
pub fn pseudo_huber(x: f64, c: f64) -> f64 {
    hyperbolic_loss(x, c * c, 1.0)
}

/// Huber loss, `x^2 / 2` for `|x| <= c` and `c (|x| - c/2)` beyond.
pub fn huber(x: f64, c: f64) -> f64 {
    let ax = x.abs();
    if ax <= c {
        0.5 * x * x
    } else {
        c * (ax - 0.5 * c)
    }
}

/// Log posterior of `(beta, rho2)` under the conditional Laplace prior with
/// the local variances integrated out, up to an additive constant.
pub fn log_joint_posterior(
    beta: &DVector<f64>,
    rho2: f64,
    data: &Dataset,
    eta: f64,
    lambda: f64,
) -> f64 {
    let n = data.n() as f64;
    let p = data.p() as f64;
    let resid = &data.y - &data.x * beta;
    let fit: f64 = resid
        .iter()
        .map(|r| (eta * (eta + r * r / rho2)).sqrt())
        .sum();
    -0.5 * (n + p) * rho2.ln() - lambda / rho2.sqrt() * beta.lp_norm(1) - fit
}
