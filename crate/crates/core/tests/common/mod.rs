#![allow(dead_code)]

use hblasso::rng_dist::RngStream;

/// `ln(e^x K_nu(x))` from `e^x K_nu(x) = int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt`,
/// integrated numerically after shifting out the peak of the log integrand.
pub fn log_bessel_k_scaled_quad(nu: f64, x: f64) -> f64 {
    let log_g = |t: f64| {
        // ln cosh(nu t) without overflow
        let a = (nu * t).abs();
        -x * (t.cosh() - 1.0) + a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    };
    let step = 1e-3;
    let mut t_peak = 0.0;
    let mut top = log_g(0.0);
    let mut t = step;
    while log_g(t) > top - 60.0 {
        if log_g(t) > top {
            top = log_g(t);
            t_peak = t;
        }
        t += step;
    }
    let end = t;
    // panels of roughly the peak width so every piece is smooth and well resolved
    let mut edges = vec![0.0];
    let panels = 64;
    for k in 1..=panels {
        edges.push(end * k as f64 / panels as f64);
    }
    if t_peak > 0.0 {
        edges.push(t_peak);
        edges.sort_by(f64::total_cmp);
    }
    let total: f64 = edges
        .windows(2)
        .map(|w| quadrature::integrate(|s| (log_g(s) - top).exp(), w[0], w[1], 1e-16).integral)
        .sum();
    top + total.ln()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

/// Sample mean and variance of `n` draws.
pub fn moments(n: usize, mut draw: impl FnMut() -> f64) -> (f64, f64) {
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n {
        let x = draw();
        let d = x - mean;
        mean += d / k as f64;
        m2 += d * (x - mean);
    }
    (mean, m2 / (n as f64 - 1.0))
}

/// `|sample mean - mean| < z` standard errors, with the standard error taken
/// from the exact variance.
pub fn mean_within(sample_mean: f64, mean: f64, var: f64, n: usize, z: f64) -> bool {
    (sample_mean - mean).abs() < z * (var / n as f64).sqrt()
}

/// Exact moments of `GIG(nu, a, b)` (density `x^(nu-1) exp(-(a x + b/x)/2)`).
pub fn gig_mean_var(nu: f64, a: f64, b: f64) -> (f64, f64) {
    let eta = (a * b).sqrt();
    let s = (b / a).sqrt();
    let k = |v: f64| hblasso::special_fn::log_bessel_k_scaled(v, eta).unwrap();
    let m1 = s * (k(nu + 1.0) - k(nu)).exp();
    let m2 = s * s * (k(nu + 2.0) - k(nu)).exp();
    (m1, m2 - m1 * m1)
}

pub fn rng(seed: u64) -> RngStream {
    RngStream::new(seed, 0)
}

/// Standardized deviations of the sample mean and sample variance from their
/// exact values, given the first four raw moments.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub mean_z: f64,
    pub var_z: f64,
}

impl MomentCheck {
    pub fn within(&self, z: f64) -> bool {
        self.mean_z.abs() < z && self.var_z.abs() < z
    }
}

pub fn moment_check(n: usize, raw: [f64; 4], draw: impl FnMut() -> f64) -> MomentCheck {
    let [m1, m2, m3, m4] = raw;
    let var = m2 - m1 * m1;
    let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    let (mean, s2) = moments(n, draw);
    let nf = n as f64;
    MomentCheck {
        mean_z: (mean - m1) / (var / nf).sqrt(),
        var_z: (s2 - var) / ((mu4 - var * var) / nf).sqrt(),
    }
}

/// `E[X^k]`, k = 1..4, for `GIG(nu, a, b)`.
pub fn gig_raw_moments(nu: f64, a: f64, b: f64) -> [f64; 4] {
    let eta = (a * b).sqrt();
    let s = (b / a).sqrt();
    let k0 = hblasso::special_fn::log_bessel_k_scaled(nu, eta).unwrap();
    std::array::from_fn(|j| {
        let m = (j + 1) as f64;
        s.powf(m) * (hblasso::special_fn::log_bessel_k_scaled(nu + m, eta).unwrap() - k0).exp()
    })
}

/// `E[X^k]`, k = 1..4, for a gamma law with the given shape and rate.
pub fn gamma_raw_moments(shape: f64, rate: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut acc = 1.0;
    for (j, o) in out.iter_mut().enumerate() {
        acc *= (shape + j as f64) / rate;
        *o = acc;
    }
    out
}

/// `E[X^k]`, k = 1..4, for the hyperbolic law `sqrt(V) Z`, `V ~ GIG(1, eta, rho2)`.
pub fn hyperbolic_raw_moments(eta: f64, rho2: f64) -> [f64; 4] {
    let v = gig_raw_moments(1.0, eta / rho2, eta * rho2);
    [0.0, v[0], 0.0, 3.0 * v[1]]
}

/// Random symmetric positive definite matrix `B B^T + dim I`.
pub fn random_spd(dim: usize, rng: &mut RngStream) -> nalgebra::DMatrix<f64> {
    let b = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.std_normal());
    &b * b.transpose() + nalgebra::DMatrix::identity(dim, dim) * dim as f64
}

/// Largest standardized deviation of the sample mean and covariance of
/// `draws` MVN samples from their targets `precision^-1 h` and `precision^-1`.
pub fn mvn_max_z(
    h: &nalgebra::DVector<f64>,
    precision: &nalgebra::DMatrix<f64>,
    draws: usize,
    rng: &mut RngStream,
) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let dim = h.len();
    let cov = precision.clone().try_inverse().unwrap();
    let mean = &cov * h;
    let g = hblasso::rng_dist::PrecisionGaussian::new(h, precision.clone()).unwrap();
    let mut sum = DVector::zeros(dim);
    let mut cross = DMatrix::zeros(dim, dim);
    for _ in 0..draws {
        let x = g.sample(rng) - &mean;
        sum += &x;
        cross += &x * x.transpose();
    }
    let nf = draws as f64;
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        worst = worst.max((sum[i] / nf).abs() / (cov[(i, i)] / nf).sqrt());
        for j in 0..=i {
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / nf).sqrt();
            worst = worst.max((cross[(i, j)] / nf - cov[(i, j)]).abs() / se);
        }
    }
    worst
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `draws` and the
/// distribution with (unnormalized) density `pdf` on `[lo, hi]`, evaluated
/// at every `stride`-th order statistic. The CDF comes from piecewise
/// quadrature and is normalized numerically, so `hi` must cut off a
/// negligible tail.
pub fn ks_distance(
    mut draws: Vec<f64>,
    pdf: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    stride: usize,
) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let integral = |a: f64, b: f64| {
        if b <= a {
            0.0
        } else {
            quadrature::integrate(&pdf, a, b, 1e-15).integral
        }
    };
    let mut points: Vec<usize> = (stride - 1..draws.len()).step_by(stride).collect();
    points.push(draws.len() - 1);
    let mut cdf = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut prev = lo;
    for &k in &points {
        let x = draws[k].clamp(lo, hi);
        acc += integral(prev, x);
        cdf.push(acc);
        prev = x;
    }
    let total = acc + integral(prev, hi);
    points
        .iter()
        .zip(&cdf)
        .map(|(&k, &f)| {
            let f = f / total;
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
