//! Independent oracles: brute-force unrolls, hand-evaluated coefficients and
//! long direct summations, compared against the library's closed forms.

use approx::assert_relative_eq;
use momlim::algorithms::{explicit_round, simulate};
use momlim::bounds::{self, hurwitz_zeta, psi1_exact, psi1_ln, psi2_ln, riemann_zeta};
use momlim::state_space::{diagonalized_trajectory, limit_cycle_amplitude, stability_upper_edge};
use momlim::{
    coefficients, make_two_client_problem, round_update, AlgoConfig, Algorithm, RecordPolicy,
    StepSchedule,
};

/// One round written out from the algorithm definitions, with nothing shared
/// with the library beyond the client's linear coefficient.
#[allow(clippy::too_many_arguments)]
fn brute_force_round(
    algorithm: Algorithm,
    mu: f64,
    beta: f64,
    local_steps: u32,
    eta_local: f64,
    eta_server: f64,
    b: f64,
    prev: f64,
    prev2: f64,
) -> f64 {
    let mut theta = prev;
    match algorithm {
        Algorithm::FedAvgM => {
            for _ in 0..local_steps {
                theta -= eta_local * (mu * theta + b);
            }
            let pseudo_gradient = prev - theta;
            let momentum = beta * (prev - prev2);
            prev - eta_server * (1.0 - beta) * pseudo_gradient + momentum
        }
        Algorithm::FedCM => {
            let damped = eta_local * (1.0 - beta);
            let drift = beta / local_steps as f64 / eta_server * (prev - prev2);
            for _ in 0..local_steps {
                theta = theta - damped * (mu * theta + b) + drift;
            }
            prev + eta_server * (theta - prev)
        }
    }
}

#[test]
fn fedcm_two_local_steps_hand_coefficients() {
    // mu = 1, beta = 0.9, J = 2, eta_l = 0.1, eta_t = 1:
    // damped local step 0.01, sum_j 0.99^j over j = 0, 1 is 1.99,
    // r = 0.45 * 1.99, q = 0.01 * 1.99, p = 1 + r + (0.99^2 - 1)
    let config =
        AlgoConfig::new(Algorithm::FedCM, 0.9, 2, 0.1, StepSchedule::Constant { eta: 1.0 }).unwrap();
    let c = coefficients(&config, 1.0, 5);
    assert_relative_eq!(c.r, 0.895_5, max_relative = 1e-14);
    assert_relative_eq!(c.q, 0.019_9, max_relative = 1e-14);
    assert_relative_eq!(c.p, 1.0 + 0.895_5 + (0.980_1 - 1.0), max_relative = 1e-14);
}

#[test]
fn fedavgm_two_local_steps_hand_unroll() {
    // eta_l = 0.5, b = 1 from zero: -0.5, then -0.5 - 0.5 * (1 - 0.5) = -0.75
    let client = momlim::QuadraticClient::new(1.0, 1.0).unwrap();
    let config =
        AlgoConfig::new(Algorithm::FedAvgM, 0.3, 2, 0.5, StepSchedule::Constant { eta: 1.0 }).unwrap();
    let theta = momlim::local_unroll(&client, 0.0, &config, 4, 0.0);
    assert_relative_eq!(theta, -0.75, max_relative = 1e-15);
}

#[test]
fn three_step_round_matches_brute_force() {
    let problem = make_two_client_problem(1.0, 10.0).unwrap();
    let t = 8;
    // even rounds see the client with linear coefficient -G
    assert_eq!(problem.active_linear_coefficient(t), -10.0);
    for algorithm in [Algorithm::FedAvgM, Algorithm::FedCM] {
        let config =
            AlgoConfig::new(algorithm, 0.9, 3, 0.1, StepSchedule::Constant { eta: 0.1 }).unwrap();
        let oracle = brute_force_round(algorithm, 1.0, 0.9, 3, 0.1, 0.1, -10.0, 1.0, 0.5);
        let closed = round_update(1.0, 0.5, &problem, &config, t).unwrap();
        let explicit = explicit_round(1.0, 0.5, &problem, &config, t);
        assert_relative_eq!(closed, oracle, max_relative = 1e-12);
        assert_relative_eq!(explicit, oracle, max_relative = 1e-12);
    }
}

#[test]
fn coefficients_recovered_by_linearity_of_brute_force() {
    for algorithm in [Algorithm::FedAvgM, Algorithm::FedCM] {
        for j in [1u32, 2, 4, 7] {
            let (mu, beta, eta_l, eta_t) = (1.7, 0.6, 0.2, 0.8);
            let config =
                AlgoConfig::new(algorithm, beta, j, eta_l, StepSchedule::Constant { eta: eta_t }).unwrap();
            let round = |prev, prev2, b| brute_force_round(algorithm, mu, beta, j, eta_l, eta_t, b, prev, prev2);
            let c = coefficients(&config, mu, 3);
            assert_relative_eq!(c.p, round(1.0, 0.0, 0.0), max_relative = 1e-13);
            assert_relative_eq!(c.r, -round(0.0, 1.0, 0.0), max_relative = 1e-13);
            assert_relative_eq!(c.q, -round(0.0, 0.0, 1.0), max_relative = 1e-13);
        }
    }
}

#[test]
fn limit_cycle_amplitude_from_period_two_fixed_point() {
    // With theta_t = (-1)^t A, the recurrence gives A (1 + p + r) = q G.
    for &(mu, beta, eta, g) in &[(1.0, 0.9, 0.5, 10.0), (2.0, 0.3, 0.7, 3.0), (0.5, 0.0, 1.0, 1.0)] {
        let config = AlgoConfig::new(Algorithm::FedAvgM, beta, 1, 1.0, StepSchedule::Constant { eta }).unwrap();
        let c = coefficients(&config, mu, 1);
        let expected = c.q * g / (1.0 + c.p + c.r);
        assert_relative_eq!(limit_cycle_amplitude(mu, beta, eta, g).unwrap(), expected, max_relative = 1e-13);
    }
}

#[test]
fn stable_window_edge_matches_jury_boundary() {
    for &(mu, beta) in &[(1.0, 0.9), (0.5, 0.2), (3.0, 0.0)] {
        let edge = 2.0 * (1.0 + beta) / (mu * (1.0 - beta));
        assert_relative_eq!(stability_upper_edge(mu, beta), edge, max_relative = 1e-15);
    }
}

/// Direct summation to N - 1 plus an Euler-Maclaurin tail from N.
fn zeta_by_summation(alpha: f64, terms: u64) -> f64 {
    let n = terms as f64;
    let head: f64 = (1..terms).rev().map(|k| (k as f64).powf(-alpha)).sum();
    let tail = n.powf(1.0 - alpha) / (alpha - 1.0) + 0.5 * n.powf(-alpha) + alpha * n.powf(-alpha - 1.0) / 12.0;
    head + tail
}

#[test]
fn zeta_matches_ten_million_term_summation() {
    for alpha in [1.5, 2.0, 3.0] {
        let oracle = zeta_by_summation(alpha, 10_000_000);
        assert_relative_eq!(riemann_zeta(alpha).unwrap(), oracle, max_relative = 1e-9);
    }
    let shifted = zeta_by_summation(2.0, 10_000_000) - 1.0 - 0.25;
    assert_relative_eq!(hurwitz_zeta(2.0, 3).unwrap(), shifted, max_relative = 1e-9);
}

#[test]
fn zeta_reference_values() {
    let pi = std::f64::consts::PI;
    assert_relative_eq!(riemann_zeta(4.0).unwrap(), pi.powi(4) / 90.0, max_relative = 1e-11);
    assert!(hurwitz_zeta(1.0, 1).is_err());
}

#[test]
fn psi1_matches_naive_product() {
    for &(t, s, alpha, mu_eta) in &[(10u64, 2u64, 1.0, 0.5), (50, 1, 0.5, 0.9), (200, 7, 2.0, 3.5)] {
        let naive: f64 = (s + 1..=t).map(|k| 1.0 - mu_eta / (k as f64).powf(alpha)).product();
        assert_relative_eq!(psi1_exact(t, s, alpha, mu_eta).unwrap(), naive, max_relative = 1e-13);
        assert_relative_eq!(psi1_ln(t, s, alpha, mu_eta).unwrap(), naive.ln(), max_relative = 1e-12);
    }
}

#[test]
fn psi1_counterexample_values() {
    // each factor 1 - 0.5/k is (k - 0.5)/k
    let exact: f64 = (3..=10).map(|k| (k as f64 - 0.5) / k as f64).product();
    assert_relative_eq!(psi1_exact(10, 2, 1.0, 0.5).unwrap(), exact, max_relative = 1e-15);
    assert!((exact - 0.469_86).abs() < 1e-5);
    // the stated upper bound exp(-0.5 ln 5) = 1/sqrt(5)
    let v = bounds::decay_product_verdict(10, 2, 1.0, 0.5).unwrap();
    assert_relative_eq!(v.upper, 1.0 / 5f64.sqrt(), max_relative = 1e-14);
    assert!(!v.upper_holds);
}

#[test]
fn integral_comparison_example() {
    // sum_{k=2..4} 1/k = 13/12 <= ln 4
    let v = bounds::integral_comparison(1, 4, 1.0).unwrap();
    assert_relative_eq!(v.exact, 13.0 / 12.0, max_relative = 1e-15);
    assert_relative_eq!(v.upper, 4f64.ln(), max_relative = 1e-15);
    assert!(v.holds);
    // sum_{k=2..3} k^-2 = 13/36 <= 1 - 1/3
    let v = bounds::integral_comparison(1, 3, 2.0).unwrap();
    assert_relative_eq!(v.exact, 13.0 / 36.0, max_relative = 1e-15);
    assert_relative_eq!(v.upper, 2.0 / 3.0, max_relative = 1e-15);
}

#[test]
fn weighted_decay_sum_matches_double_loop() {
    let (t, alpha, mu_eta) = (300u64, 1.5, 1.2);
    let oracle: f64 = (2..=t)
        .map(|s| {
            let tail: f64 = (s + 1..=t).map(|k| 1.0 - mu_eta / (k as f64).powf(alpha)).product();
            tail / (s as f64).powf(2.0 * alpha)
        })
        .sum();
    assert_relative_eq!(bounds::weighted_decay_sum(t, alpha, mu_eta).unwrap(), oracle, max_relative = 1e-12);
}

#[test]
fn alternating_sums_match_double_loop() {
    let (t, alpha, n, mu_eta, beta) = (200u64, 1.3, 0.7, 0.9, 0.8);
    let sign = |s: u64| if s.is_multiple_of(2) { 1.0 } else { -1.0 };
    let psi1: f64 = (2..=t)
        .map(|s| {
            let w: f64 = (s + 1..=t).map(|k| 1.0 - mu_eta / (k as f64).powf(alpha)).product();
            sign(s) * w / (s as f64).powf(n)
        })
        .sum();
    let psi2: f64 = (2..=t)
        .map(|s| {
            let w: f64 = (s + 1..=t).map(|k| beta * (1.0 + mu_eta / (k as f64).powf(alpha))).product();
            sign(s) * w / (s as f64).powf(n)
        })
        .sum();
    assert_relative_eq!(bounds::alt_sum_psi1(t, alpha, n, mu_eta).unwrap(), psi1, max_relative = 1e-11);
    assert_relative_eq!(bounds::alt_sum_psi2(t, alpha, n, mu_eta, beta).unwrap(), psi2, max_relative = 1e-11);
}

#[test]
fn diagonalized_path_matches_simulation() {
    let horizon = 100_000;
    for &(beta, mu, eta, alpha, theta0) in &[(0.9, 1.0, 0.5, 1.0, 0.0), (0.5, 2.0, 0.3, 0.5, 10.0), (0.0, 1.0, 0.8, 1.5, -3.0)] {
        let schedule = StepSchedule::Polynomial { eta, alpha };
        let g = 10.0;
        let path = diagonalized_trajectory(beta, mu, &schedule, g, theta0, horizon).unwrap();
        let config = AlgoConfig::new(Algorithm::FedAvgM, beta, 1, 1.0, schedule).unwrap();
        let problem = make_two_client_problem(mu, g).unwrap();
        let traj = simulate(&problem, &config, horizon, theta0, &RecordPolicy::Every).unwrap();
        let scale = path.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (i, &theta) in path.iter().enumerate() {
            let t = i as u64 + 1;
            let direct = traj.theta_at(t).unwrap();
            assert!(
                (theta - direct).abs() <= 1e-10 * scale,
                "beta={beta} t={t}: diagonalized {theta} vs direct {direct}"
            );
        }
    }
}

#[test]
fn slow_decay_product_log_rate() {
    // -ln psi1(t, 1) / t^(1 - alpha) tends to mu_eta / (1 - alpha)
    let (alpha, mu_eta) = (0.5, 0.5);
    let t = 1_000_000u64;
    let scaled = -psi1_ln(t, 1, alpha, mu_eta).unwrap() / (t as f64).powf(1.0 - alpha);
    assert_relative_eq!(scaled, mu_eta / (1.0 - alpha), max_relative = 2e-2);
}

#[test]
fn critical_decay_product_power_law() {
    // psi1(t, 1) t^mu_eta settles to a constant
    let mu_eta = 0.7;
    let scaled = |t: u64| (psi1_ln(t, 1, 1.0, mu_eta).unwrap() + mu_eta * (t as f64).ln()).exp();
    let (early, late) = (scaled(10_000), scaled(1_000_000));
    assert_relative_eq!(early, late, max_relative = 1e-3);
}

#[test]
fn fast_decay_product_has_positive_limit() {
    let (alpha, mu_eta) = (2.0, 1.5);
    let a = psi1_exact(100_000, 1, alpha, mu_eta).unwrap();
    let b = psi1_exact(1_000_000, 1, alpha, mu_eta).unwrap();
    assert!(a > 0.0);
    assert_relative_eq!(a, b, max_relative = 1e-4);
    let stated = bounds::psi1_bounds(1_000_000, 1, alpha, mu_eta).unwrap();
    assert!(stated.lower <= b && b <= stated.corrected_upper);
}

#[test]
fn growth_product_log_rate() {
    let beta: f64 = 0.9;
    let ratio = |t: u64| psi2_ln(t, 1, 0.5, 1.0, beta).unwrap() / (t as f64 * beta.ln());
    assert!((ratio(1_000_000) - 1.0).abs() < (ratio(10_000) - 1.0).abs());
    assert_relative_eq!(ratio(1_000_000), 1.0, max_relative = 3e-2);
}
