//! Seedable random streams and the variate generators used by the samplers.
//!
//! Every chain, replication and cross-validation fold owns one [`RngStream`]:
//! a ChaCha8 generator keyed by a master seed and positioned on its own
//! 64-bit stream, so independent workers draw from non-overlapping sequences
//! and any run can be replayed from `(seed, stream_id)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{positive, HblError, Result};

/// Below this concentration the GIG law is replaced by its gamma or
/// inverse-gamma limit.
const GIG_MIN_CONCENTRATION: f64 = 10.0 * f64::EPSILON;

/// A deterministic random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for `index` within a named family of streams (`domain`), e.g.
    /// the data generator and the chain of the same replication.
    pub fn derived(seed: u64, domain: u32, index: u32) -> Self {
        RngStream::new(seed, (u64::from(domain) << 32) | u64::from(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Generalized inverse Gaussian parameters in the `(nu, eta, rho2)` form:
/// density proportional to `x^(nu-1) exp(-eta/2 (x/rho2 + rho2/x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub nu: f64,
    pub eta: f64,
    pub rho2: f64,
}

impl GigParams {
    pub fn new(nu: f64, eta: f64, rho2: f64) -> Self {
        GigParams { nu, eta, rho2 }
    }

    /// From the `(nu, a, b)` form with density proportional to
    /// `x^(nu-1) exp(-(a x + b / x) / 2)`.
    pub fn from_ab(nu: f64, a: f64, b: f64) -> Self {
        GigParams {
            nu,
            eta: (a * b).sqrt(),
            rho2: (b / a).sqrt(),
        }
    }

    pub fn a(&self) -> f64 {
        self.eta / self.rho2
    }

    pub fn b(&self) -> f64 {
        self.eta * self.rho2
    }
}

/// One draw from `GIG(nu, eta, rho2)`.
///
/// Uses the three regimes of Hörmann and Leydold (2014): ratio-of-uniforms
/// with mode shift for `|nu| > 2` or `eta > 3`, ratio-of-uniforms without
/// shift for moderate parameters, and a three-piece rejection hat when the
/// concentration is small and `|nu| < 1`. Valid for every real order.
pub fn sample_gig(params: GigParams, rng: &mut RngStream) -> Result<f64> {
    if !params.nu.is_finite() {
        return Err(HblError::Domain {
            what: "gig order",
            value: params.nu,
        });
    }
    let omega = positive("gig eta", params.eta)?;
    let alpha = positive("gig rho2", params.rho2)?;
    let order = params.nu.abs();

    if omega < GIG_MIN_CONCENTRATION {
        // GIG(nu, a, b) -> Ga(nu, a/2) as b -> 0 and 1/Ga(-nu, b/2) as a -> 0
        return if params.nu > 0.0 {
            sample_gamma(params.nu, 0.5 * params.a(), rng)
        } else if params.nu < 0.0 {
            Ok(1.0 / sample_gamma(-params.nu, 0.5 * params.b(), rng)?)
        } else {
            Err(HblError::Domain {
                what: "gig eta (order 0)",
                value: omega,
            })
        };
    }

    let standard = if order > 2.0 || omega > 3.0 {
        gig_rou_shift(order, omega, rng)
    } else if order >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(order, omega, rng)
    } else {
        gig_small_concentration(order, omega, rng)
    };
    Ok(if params.nu < 0.0 {
        alpha / standard
    } else {
        alpha * standard
    })
}

fn gig_mode(order: f64, omega: f64) -> f64 {
    if order >= 1.0 {
        (((order - 1.0) * (order - 1.0) + omega * omega).sqrt() + (order - 1.0)) / omega
    } else {
        omega / (((1.0 - order) * (1.0 - order) + omega * omega).sqrt() + (1.0 - order))
    }
}

fn gig_rou_noshift(order: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (order - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(order, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((order + 1.0) + ((order + 1.0) * (order + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (order + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.uniform();
        let v = rng.uniform();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_shift(order: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (order - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(order, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // roots of the cubic bounding the ratio-of-uniforms region
    let a = -(2.0 * (order + 1.0) / omega + xm);
    let b = 2.0 * (order - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt()))
        .clamp(-1.0, 1.0)
        .acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;

    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.uniform() * (uplus - uminus);
        let v = rng.uniform();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_small_concentration(order: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let xm = gig_mode(order, omega);
    let x0 = omega / (1.0 - order);

    let k0 = ((order - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let area0 = k0 * x0;
    let (k1, area1, k2, area2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        area1 = 0.0;
        k2 = x0.powf(order - 1.0);
        area2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        area1 = if order == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / order * ((2.0 / omega).powf(order) - x0.powf(order))
        };
        k2 = (2.0 / omega).powf(order - 1.0);
        area2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = area0 + area1 + area2;

    loop {
        let mut v = total * rng.uniform();
        let (x, hx);
        if v <= area0 {
            x = x0 * v / area0;
            hx = k0;
        } else {
            v -= area0;
            if v <= area1 {
                if order == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(order) + order / k1 * v).powf(1.0 / order);
                    hx = k1 * x.powf(order - 1.0);
                }
            } else {
                v -= area1;
                let start = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.uniform() * hx;
        if u.ln() <= (order - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// One draw from the inverse Gaussian law with mean `mu` and shape `lambda`.
///
/// Michael–Schucany–Haas transformation with roots. The smaller root is
/// evaluated as `mu / (1 + w/2 + sqrt(w + w^2/4))`, `w = mu z^2 / lambda`,
/// which has no cancellation for either extreme of `lambda / mu`.
pub fn sample_inv_gauss(mu: f64, lambda: f64, rng: &mut RngStream) -> Result<f64> {
    let mu = positive("inverse gaussian mean", mu)?;
    let lambda = positive("inverse gaussian shape", lambda)?;
    let d = inv_gauss_root(mu / lambda, rng);
    // roots mu / d and mu * d; the smaller is kept with probability d / (1 + d)
    let keep = rng.uniform() * (d + 1.0) <= d;
    Ok(if keep { mu / d } else { mu * d })
}

/// Reciprocal of an `InvGauss(1 / inv_mu, 1 / inv_lambda)` draw. Consumes the
/// stream exactly as [`sample_inv_gauss`] does.
pub fn sample_inv_gauss_recip(inv_mu: f64, inv_lambda: f64, rng: &mut RngStream) -> Result<f64> {
    let inv_mu = positive("inverse gaussian mean", inv_mu)?;
    let inv_lambda = positive("inverse gaussian shape", inv_lambda)?;
    let d = inv_gauss_root(inv_lambda / inv_mu, rng);
    let keep = rng.uniform() * (d + 1.0) <= d;
    Ok(if keep { d * inv_mu } else { inv_mu / d })
}

/// `mu / x` for the smaller root `x` given `mu / lambda`.
fn inv_gauss_root(ratio: f64, rng: &mut RngStream) -> f64 {
    let z = rng.std_normal();
    let w = ratio * z * z;
    1.0 + 0.5 * w + (w * (1.0 + 0.25 * w)).sqrt()
}

/// Gamma draw with the given shape and rate.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    let shape = positive("gamma shape", shape)?;
    let rate = positive("gamma rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| HblError::Domain {
        what: "gamma parameters",
        value: shape,
    })?;
    Ok(dist.sample(rng))
}

/// Inverse-gamma draw: the reciprocal of a `Ga(shape, scale)` draw.
pub fn sample_inv_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(1.0 / sample_gamma(shape, scale, rng)?)
}

/// Exponential draw with the given rate.
pub fn sample_exp(rate: f64, rng: &mut RngStream) -> Result<f64> {
    let rate = positive("exponential rate", rate)?;
    Ok(-rng.uniform().ln() / rate)
}

/// Draw from the symmetric hyperbolic law with density proportional to
/// `exp(-sqrt(eta (eta + x^2 / rho2)))`, as a normal variance mixture with
/// `GIG(1, eta, rho2)` mixing.
pub fn sample_hyperbolic(eta: f64, rho2: f64, rng: &mut RngStream) -> Result<f64> {
    let variance = sample_gig(GigParams::new(1.0, eta, rho2), rng)?;
    Ok(variance.sqrt() * rng.std_normal())
}

/// One univariate slice-sampling update (stepping out, then shrinkage)
/// leaving the density `exp(log_f)` invariant. `width` is the initial
/// bracket size; at most `max_steps` expansions are made on each side.
pub fn slice_sample<F>(
    x0: f64,
    log_f: F,
    width: f64,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let width = positive("slice width", width)?;
    let f0 = log_f(x0);
    if !f0.is_finite() {
        return Err(HblError::Domain {
            what: "slice sampler start log density",
            value: f0,
        });
    }
    let level = f0 + rng.uniform().ln();
    let mut lo = x0 - width * rng.uniform();
    let mut hi = lo + width;
    let mut left = (max_steps as f64 * rng.uniform()) as usize;
    let mut right = max_steps.saturating_sub(1 + left);
    while left > 0 && log_f(lo) > level {
        lo -= width;
        left -= 1;
    }
    while right > 0 && log_f(hi) > level {
        hi += width;
        right -= 1;
    }
    loop {
        let x = lo + (hi - lo) * rng.uniform();
        if log_f(x) > level {
            return Ok(x);
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < 1e-14 * (1.0 + x0.abs()) {
            return Ok(x0);
        }
    }
}

/// Gaussian with mean `precision^-1 h` and covariance `precision^-1`,
/// parameterized by its precision.
#[derive(Debug, Clone)]
pub struct PrecisionGaussian {
    factor: Cholesky<f64, Dyn>,
    mean: DVector<f64>,
}

impl PrecisionGaussian {
    pub fn new(h: &DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        if precision.nrows() != h.len() || precision.ncols() != h.len() {
            return Err(HblError::DimensionMismatch {
                expected: h.len(),
                got: precision.nrows(),
            });
        }
        let factor = Cholesky::new(precision).ok_or(HblError::NotPositiveDefinite {
            context: "gaussian precision",
        })?;
        let mean = factor.solve(h);
        Ok(PrecisionGaussian { factor, mean })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower-triangular `L` with `precision = L L^T`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `mean + L^-T z` for a caller-supplied standard normal vector.
    pub fn transform(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.factor.l_dirty();
        let offset = l
            .tr_solve_lower_triangular(z)
            .unwrap_or_else(|| DVector::zeros(z.len()));
        &self.mean + offset
    }

    pub fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.std_normal());
        self.transform(&z)
    }
}

/// One draw from `N(precision^-1 h, precision^-1)` via a Cholesky factor of
/// the precision matrix; no explicit inverse is formed.
pub fn sample_mvn_from_precision(
    h: &DVector<f64>,
    precision: DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    Ok(PrecisionGaussian::new(h, precision)?.sample(rng))
}
