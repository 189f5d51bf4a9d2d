mod common;

use common::{log_bessel_k_scaled_quad, rel_err};
use hblasso::special_fn::{d2log_k, dlog_k, log_bessel_k_scaled, log_k_derivatives};
use proptest::prelude::*;

#[test]
fn oracle_reproduces_half_order_closed_form() {
    // e^x K_{1/2}(x) = sqrt(pi / (2x))
    for x in [0.01, 0.3, 1.0, 4.0, 25.0, 300.0] {
        let want = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln();
        let got = log_bessel_k_scaled_quad(0.5, x);
        assert!(
            (got - want).abs() < 1e-12 * want.abs().max(1.0),
            "x={x}: {got} vs {want}"
        );
    }
}

#[test]
fn matches_quadrature_across_regimes() {
    for nu in [0.0, 0.2, 0.5, 1.0, 1.5, 2.7, 6.0, 15.0] {
        for x in [0.005, 0.4, 1.99, 2.01, 9.0, 80.0] {
            let got = log_bessel_k_scaled(nu, x).unwrap();
            let want = log_bessel_k_scaled_quad(nu, x);
            assert!(rel_err(got, want) < 1e-10, "nu={nu} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn order_is_symmetric() {
    for (nu, x) in [(0.3, 0.7), (1.0, 3.0), (4.5, 12.0)] {
        assert_eq!(
            log_bessel_k_scaled(nu, x).unwrap(),
            log_bessel_k_scaled(-nu, x).unwrap()
        );
    }
}

#[test]
fn recurrence_holds() {
    // K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu
    for (nu, x) in [(1.0, 0.1), (1.0, 1.0), (2.5, 5.0), (7.0, 0.8), (1.0, 250.0)] {
        let k = |v: f64| log_bessel_k_scaled(v, x).unwrap().exp();
        let lhs = k(nu + 1.0);
        let rhs = k(nu - 1.0) + 2.0 * nu / x * k(nu);
        assert!(rel_err(lhs, rhs) < 1e-12, "nu={nu} x={x}");
    }
}

#[test]
fn rejects_bad_arguments() {
    assert!(log_bessel_k_scaled(1.0, 0.0).is_err());
    assert!(log_bessel_k_scaled(1.0, -2.0).is_err());
    assert!(log_bessel_k_scaled(f64::NAN, 1.0).is_err());
    assert!(dlog_k(1.0, f64::INFINITY).is_err());
}

#[test]
fn second_derivative_of_order_one_decays_like_half_inverse_square() {
    for x in [1e3, 1e5] {
        let d2 = d2log_k(1.0, x).unwrap();
        assert!(rel_err(d2, 0.5 / (x * x)) < 2.0 / x, "x={x}: {d2}");
    }
}

proptest! {
    #[test]
    fn derivatives_match_central_differences(nu in 0.0f64..8.0, lx in -3.0f64..4.0) {
        let x = 10f64.powf(lx);
        let h = 1e-5 * x;
        let lk = |t: f64| log_bessel_k_scaled(nu, t).unwrap() - t;
        let fd1 = (lk(x + h) - lk(x - h)) / (2.0 * h);
        let (d1, d2) = log_k_derivatives(nu, x).unwrap();
        prop_assert!((d1 - fd1).abs() < 1e-6 * d1.abs().max(1e-3), "d1 {} fd {}", d1, fd1);
        let fd2 = (dlog_k(nu, x + h).unwrap() - dlog_k(nu, x - h).unwrap()) / (2.0 * h);
        prop_assert!((d2 - fd2).abs() < 1e-6 * d2.abs().max(1e-8), "d2 {} fd {}", d2, fd2);
        prop_assert!(d2 > 0.0);
    }

    #[test]
    fn log_k_is_decreasing(nu in 0.0f64..10.0, x in 0.01f64..50.0) {
        prop_assert!(dlog_k(nu, x).unwrap() < 0.0);
    }
}
