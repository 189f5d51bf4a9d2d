mod common;

use common::*;
use hblasso::gibbs::{update_rho2, update_sigma2, update_tau2, PriorForm};
use hblasso::model::ChainState;
use hblasso::rng_dist::RngStream;
use hblasso::{run_chain, Dataset, FitConfig, SamplerKind};
use nalgebra::{DMatrix, DVector};

fn state(beta: &[f64], n: usize) -> ChainState {
    ChainState {
        beta: DVector::from_row_slice(beta),
        tau2: DVector::from_element(beta.len(), 1.0),
        sigma2: DVector::from_element(n, 1.0),
        rho2: 1.0,
        lambda2: 1.0,
        eta: 1.0,
    }
}

#[test]
fn rho2_single_observation_matches_quadrature_mean() {
    // n = p = 1, sigma2 = tau2 = 1, beta = 0, eta = 1: GIG(-3/2, 1, 1)
    let d = Dataset::new(
        DVector::from_element(1, 0.3),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap();
    let s = state(&[0.0], 1);
    let mut r = rng(61);
    let n = 400_000;
    let (mean, _) = moments(n, || {
        update_rho2(&s, &d, PriorForm::Conditional, &mut r).unwrap()
    });
    let pdf = |x: f64| x.powf(-2.5) * (-0.5 * (x + 1.0 / x)).exp();
    let mass = quadrature::integrate(pdf, 0.0, 200.0, 1e-14).integral;
    let first = quadrature::integrate(|x| x * pdf(x), 0.0, 200.0, 1e-14).integral / mass;
    let second = quadrature::integrate(|x| x * x * pdf(x), 0.0, 200.0, 1e-14).integral / mass;
    assert!(
        mean_within(mean, first, second - first * first, n, 4.0),
        "{mean} vs {first}"
    );
}

#[test]
fn sigma2_at_zero_residual_is_inverse_of_unit_inverse_gaussian() {
    // residual 0, eta = rho2 = 1: 1/sigma2 ~ InvGauss(1, 1)
    let d = Dataset::new(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let s = state(&[0.0], 1);
    let mut r = rng(62);
    let c = moment_check(N_DRAWS, gig_raw_moments(-0.5, 1.0, 1.0), || {
        1.0 / update_sigma2(&s, &d, &mut r).unwrap()[0]
    });
    assert!(c.within(4.0), "{c:?}");
}

const N_DRAWS: usize = 200_000;

#[test]
fn tau2_inverse_mean_matches_inverse_gaussian() {
    // 1/tau2_j ~ InvGauss(sqrt(lambda2 rho2 / beta_j^2), lambda2)
    let mut s = state(&[0.8], 1);
    s.lambda2 = 2.0;
    s.rho2 = 1.5;
    let mu = (2.0f64 * 1.5 / 0.64).sqrt();
    let mut r = rng(63);
    let c = moment_check(N_DRAWS, gig_raw_moments(-0.5, 2.0 / (mu * mu), 2.0), || {
        1.0 / update_tau2(&s, PriorForm::Conditional, &mut r).unwrap()[0]
    });
    assert!(c.within(4.0), "{c:?}");
}

#[test]
fn larger_coefficients_get_larger_local_scales() {
    let small = state(&[0.1], 1);
    let large = state(&[10.0], 1);
    let mut r1 = rng(64);
    let mut r2 = rng(64);
    let wins = (0..10_000)
        .filter(|_| {
            update_tau2(&large, PriorForm::Conditional, &mut r1).unwrap()[0]
                > update_tau2(&small, PriorForm::Conditional, &mut r2).unwrap()[0]
        })
        .count();
    assert!(wins > 9_000, "{wins}");
}

#[test]
fn posterior_ignores_observation_order() {
    let mut g = RngStream::new(8, 0);
    let n = 60;
    let x = DMatrix::from_fn(n, 3, |_, _| g.std_normal());
    let y =
        &x * DVector::from_vec(vec![2.0, 0.0, -1.0]) + DVector::from_fn(n, |_, _| g.std_normal());
    let d = Dataset::new(y, x).unwrap();
    let order: Vec<usize> = (0..n).rev().collect();
    let cfg = FitConfig::new(SamplerKind::Hbl, 8000, 1000, 2);
    let a = run_chain(&d, &cfg).unwrap();
    let b = run_chain(&d.permuted(&order), &cfg).unwrap();
    let sd = a.coefficient_draws().row_variance().map(f64::sqrt);
    let diff = (a.coefficient_draws().row_mean() - b.coefficient_draws().row_mean()).abs();
    for j in 0..diff.len() {
        // two chains with effective sizes in the thousands
        assert!(
            diff[j] < 0.15 * sd[j].max(1e-3) + 0.01,
            "coef {j}: {} vs sd {}",
            diff[j],
            sd[j]
        );
    }
}
