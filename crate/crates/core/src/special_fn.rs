//! Modified Bessel functions of the second kind, evaluated in exponentially
//! scaled log form, plus the first two derivatives of `log K_nu` in the
//! argument.
//!
//! Orders are reduced to `mu = nu - round(nu)` in `[-1/2, 1/2]`. For `x < 2`
//! `K_mu` and `K_{mu+1}` come from Temme's series; for `x >= 2` from Steed's
//! continued fraction (CF2), which yields `e^x K_mu(x)` directly. Higher orders
//! follow by forward recurrence on the ratio `K_{nu+1} / K_nu`, which is stable
//! for `K` and never overflows because only logs and ratios are carried.
//!
//! The ratio is tracked as `s = K_{nu+1}/K_nu - 1`. CF2 produces `s` without
//! cancellation, which keeps the second log-derivative accurate at large
//! arguments where it decays like `1 / (2 x^2)`.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use crate::error::{HblError, Result};

/// Taylor coefficients of `1 / Gamma(1 + z)` around `z = 0`.
const RGAMMA_TAYLOR: [f64; 28] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
];

const MAX_SERIES_TERMS: usize = 10_000;

/// A single evaluation of `ln(e^x K_nu(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub nu: f64,
    pub x: f64,
    pub log_scaled_value: f64,
}

impl BesselEval {
    pub fn new(nu: f64, x: f64) -> Result<Self> {
        Ok(BesselEval {
            nu,
            x,
            log_scaled_value: log_bessel_k_scaled(nu, x)?,
        })
    }

    /// `ln K_nu(x)` without the exponential scaling.
    pub fn log_value(&self) -> f64 {
        self.log_scaled_value - self.x
    }
}

/// `ln(e^x K_nu(x))` for real order `nu` and `x > 0`.
pub fn log_bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    check_argument(nu, x)?;
    Ok(scaled_with_ratio(nu.abs(), x).0)
}

/// `d/dx ln K_nu(x) = -(K_{nu-1} + K_{nu+1}) / (2 K_nu)`.
pub fn dlog_k(nu: f64, eta: f64) -> Result<f64> {
    check_argument(nu, eta)?;
    let nu = nu.abs();
    let (_, s) = scaled_with_ratio(nu, eta);
    Ok(nu / eta - 1.0 - s)
}

/// `d^2/dx^2 ln K_nu(x)`, strictly positive for every `x > 0`.
pub fn d2log_k(nu: f64, eta: f64) -> Result<f64> {
    check_argument(nu, eta)?;
    let nu = nu.abs();
    let (_, s) = scaled_with_ratio(nu, eta);
    Ok(second_log_derivative(nu, eta, s))
}

/// Both log-derivatives from one Bessel evaluation.
pub fn log_k_derivatives(nu: f64, eta: f64) -> Result<(f64, f64)> {
    check_argument(nu, eta)?;
    let nu = nu.abs();
    let (_, s) = scaled_with_ratio(nu, eta);
    Ok((nu / eta - 1.0 - s, second_log_derivative(nu, eta, s)))
}

// With r = K_{nu+1}/K_nu = 1 + s, the recurrences give
//   (ln K)'  = nu/x - r
//   (ln K)'' = -nu/x^2 + (2 nu + 1) r / x - r^2.
// Grouped so the O(1/x) pieces cancel against each other explicitly.
fn second_log_derivative(nu: f64, x: f64, s: f64) -> f64 {
    let m = 2.0 * nu + 1.0;
    (m / x - 2.0 * s) + (m * s / x - s * s - nu / (x * x))
}

fn check_argument(nu: f64, x: f64) -> Result<()> {
    if !nu.is_finite() {
        return Err(HblError::Domain {
            what: "bessel order",
            value: nu,
        });
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(HblError::Domain {
            what: "bessel argument",
            value: x,
        });
    }
    Ok(())
}

/// Returns `(ln(e^x K_nu(x)), K_{nu+1}(x)/K_nu(x) - 1)` for `nu >= 0`.
pub(crate) fn scaled_with_ratio(nu: f64, x: f64) -> (f64, f64) {
    debug_assert!(nu >= 0.0);
    let steps = nu.round();
    let mu = nu - steps;
    let (mut log_k, mut s) = if x < 2.0 {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };
    // K_{m+1} = K_{m-1} + (2m/x) K_m  =>  r_{k+1} = 2(mu+k+1)/x + 1/r_k
    for k in 0..steps as usize {
        log_k += s.ln_1p();
        s = 2.0 * (mu + k as f64 + 1.0) / x - s / (1.0 + s);
    }
    (log_k, s)
}

// 1/Gamma(1+mu) split into even and odd parts:
//   gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2,  gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mu2 = mu * mu;
    let mut even = 0.0;
    let mut odd = 0.0;
    for k in (0..RGAMMA_TAYLOR.len()).rev() {
        if k % 2 == 0 {
            even = even * mu2 + RGAMMA_TAYLOR[k];
        } else {
            odd = odd * mu2 + RGAMMA_TAYLOR[k];
        }
    }
    let gam1 = -odd;
    let gam2 = even;
    let rgamma_plus = even + mu * odd;
    let rgamma_minus = even - mu * odd;
    (gam1, gam2, rgamma_plus, rgamma_minus)
}

/// Temme's series for `|mu| <= 1/2`, `0 < x < 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < f64::EPSILON {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -half_x.ln();
    let e = mu * d;
    let fact2 = if e.abs() < f64::EPSILON {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, rgamma_plus, rgamma_minus) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / rgamma_plus;
    let mut q = 0.5 / (e * rgamma_minus);
    let mut c = 1.0;
    let d = half_x * half_x;
    let mut sum1 = p;
    for i in 1..=MAX_SERIES_TERMS {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    let k_mu = sum;
    let k_mu1 = sum1 * 2.0 / x;
    (k_mu.ln() + x, k_mu1 / k_mu - 1.0)
}

/// Steed's method for CF2, `|mu| <= 1/2`, `x >= 2`. Returns the scaled log
/// value and `s = K_{mu+1}/K_mu - 1` computed as `(mu + 1/2 - h)/x`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_SERIES_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let log_k = 0.5 * (PI / (2.0 * x)).ln() - s.ln();
    (log_k, (mu + 0.5 - h) / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_scaled(nu: f64, x: f64) -> f64 {
        log_bessel_k_scaled(nu, x).unwrap().exp()
    }

    #[test]
    fn half_order_closed_form() {
        for &x in &[1e-6, 0.1, 1.0, 1.999, 2.0, 2.5, 30.0, 1e4] {
            let expected = 0.5 * (PI / (2.0 * x)).ln();
            let got = log_bessel_k_scaled(0.5, x).unwrap();
            assert!((got - expected).abs() < 1e-13, "x={x}: {got} vs {expected}");
        }
        assert!((log_bessel_k_scaled(0.5, 2.0).unwrap() - (PI / 4.0).sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn three_halves_closed_form() {
        // K_{3/2}(x) = sqrt(pi/2x) e^{-x} (1 + 1/x)
        for &x in &[1e-3, 0.5, 1.5, 3.0, 100.0] {
            let expected = 0.5 * (PI / (2.0 * x)).ln() + (1.0 / x).ln_1p();
            let got = log_bessel_k_scaled(1.5, x).unwrap();
            assert!((got - expected).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn reference_values() {
        // K_0(1), K_1(1), K_1(2.5) to 16 digits
        let k0 = 0.421_024_438_240_708_3;
        let k1 = 0.601_907_230_197_234_6;
        let k1_25 = 0.073_890_816_347_747_1;
        assert!(((log_bessel_k_scaled(0.0, 1.0).unwrap() - 1.0).exp() / k0 - 1.0).abs() < 1e-13);
        assert!(((log_bessel_k_scaled(1.0, 1.0).unwrap() - 1.0).exp() / k1 - 1.0).abs() < 1e-13);
        assert!(((log_bessel_k_scaled(1.0, 2.5).unwrap() - 2.5).exp() / k1_25 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_argument_asymptote() {
        let got = log_bessel_k_scaled(1.0, 1e4).unwrap();
        let asym = 0.5 * (PI / 2e4).ln();
        // leading correction is (4 - 1)/(8x)
        assert!((got - asym).abs() < 1e-4);
        assert!((got - asym - (3.0f64 / 8e4).ln_1p()).abs() < 1e-8);
    }

    #[test]
    fn order_symmetry() {
        for &nu in &[0.2, 0.5, 1.0, 2.7, 5.0] {
            for &x in &[1e-4, 0.3, 2.0, 17.0] {
                let a = log_bessel_k_scaled(nu, x).unwrap();
                let b = log_bessel_k_scaled(-nu, x).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn recurrence_holds() {
        for &nu in &[0.3, 1.0, 2.5, 4.0] {
            for &x in &[0.01, 0.7, 2.0, 9.0, 250.0] {
                let lhs = k_scaled(nu + 1.0, x);
                let rhs = k_scaled(nu - 1.0, x) + 2.0 * nu / x * k_scaled(nu, x);
                assert!((lhs / rhs - 1.0).abs() < 1e-10, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn finite_over_wide_range() {
        for i in 0..=64 {
            let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 64.0);
            for j in 0..=20 {
                let nu = -5.0 + 0.5 * j as f64;
                assert!(
                    log_bessel_k_scaled(nu, x).unwrap().is_finite(),
                    "nu={nu} x={x}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(log_bessel_k_scaled(1.0, 0.0).is_err());
        assert!(log_bessel_k_scaled(1.0, -1.0).is_err());
        assert!(log_bessel_k_scaled(1.0, f64::NAN).is_err());
        assert!(log_bessel_k_scaled(1.0, f64::INFINITY).is_err());
        assert!(dlog_k(1.0, 0.0).is_err());
        assert!(d2log_k(1.0, -2.0).is_err());
    }

    fn log_k(nu: f64, x: f64) -> f64 {
        log_bessel_k_scaled(nu, x).unwrap() - x
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let h = 1e-5;
        let x = 2.5;
        let fd = (log_k(1.0, x + h) - log_k(1.0, x - h)) / (2.0 * h);
        let got = dlog_k(1.0, x).unwrap();
        assert!((got / fd - 1.0).abs() < 1e-7, "{got} vs {fd}");
    }

    #[test]
    fn first_derivative_bessel_identity() {
        for &(nu, x) in &[(1.0, 0.3), (1.0, 4.0), (2.2, 1.1), (0.0, 7.0)] {
            let expected =
                -(k_scaled(nu - 1.0, x) + k_scaled(nu + 1.0, x)) / (2.0 * k_scaled(nu, x));
            assert!((dlog_k(nu, x).unwrap() / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_bessel_identity() {
        for &(nu, x) in &[(1.0, 0.3), (1.0, 4.0), (2.2, 1.1), (0.5, 7.0)] {
            let k = k_scaled(nu, x);
            let kpp = (k_scaled(nu - 2.0, x) + 2.0 * k + k_scaled(nu + 2.0, x)) / 4.0;
            let kp = -(k_scaled(nu - 1.0, x) + k_scaled(nu + 1.0, x)) / 2.0;
            let expected = kpp / k - (kp / k).powi(2);
            assert!((d2log_k(nu, x).unwrap() / expected - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let h = 1e-4;
        let x = 1.0;
        let fd = (log_k(1.0, x + h) - 2.0 * log_k(1.0, x) + log_k(1.0, x - h)) / (h * h);
        let got = d2log_k(1.0, x).unwrap();
        assert!((got / fd - 1.0).abs() < 1e-6, "{got} vs {fd}");
    }

    #[test]
    fn derivative_limits() {
        assert!((dlog_k(1.0, 1e6).unwrap() + 1.0).abs() < 1e-5);
        assert!(dlog_k(1.0, 1e-6).unwrap() < -1e5);
        let big = d2log_k(1.0, 1e5).unwrap();
        assert!(big > 0.0);
        assert!((big * 2e10 - 1.0).abs() < 1e-4, "{big}");
    }

    #[test]
    fn second_derivative_positive() {
        for i in 0..=12 {
            let nu = -3.0 + 0.5 * i as f64;
            for &eta in &[0.1, 1.0, 10.0, 100.0] {
                assert!(d2log_k(nu, eta).unwrap() > 0.0, "nu={nu} eta={eta}");
            }
        }
    }

    #[test]
    fn first_derivative_increases_toward_minus_one() {
        for &nu in &[0.0, 0.5, 1.0, 3.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=120 {
                let eta = 10f64.powf(-4.0 + 10.0 * i as f64 / 120.0);
                let d = dlog_k(nu, eta).unwrap();
                assert!(d > prev, "nu={nu} eta={eta}");
                assert!(d < -1.0);
                prev = d;
            }
        }
    }
}
