//! Scalar quadratic client objectives and cyclic participation.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Tolerance used when checking that `1 / participation_fraction` is an integer.
const PERIOD_TOLERANCE: f64 = 1e-9;

/// One client objective f(theta) = mu/2 theta^2 + b theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticClient {
    pub mu: f64,
    pub b: f64,
}

impl QuadraticClient {
    pub fn new(mu: f64, b: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
        }
        if !b.is_finite() {
            return Err(Error::invalid(format!("b must be finite, got {b}")));
        }
        Ok(Self { mu, b })
    }

    #[inline]
    pub fn value(&self, theta: f64) -> f64 {
        0.5 * self.mu * theta * theta + self.b * theta
    }

    #[inline]
    pub fn gradient(&self, theta: f64) -> f64 {
        self.mu * theta + self.b
    }
}

/// Finite-sum problem with a deterministic cyclic participation schedule.
///
/// Clients are split into `period` contiguous blocks; round `t` (1-based)
/// activates block `(t - 1 + phase_shift) mod period`.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationProblem {
    clients: Vec<QuadraticClient>,
    participation_fraction: f64,
    phase_shift: usize,
}

impl FederationProblem {
    /// Builds a problem and rejects it unless every assumption check passes.
    pub fn new(clients: Vec<QuadraticClient>, participation_fraction: f64) -> Result<Self> {
        let problem = Self::new_unchecked(clients, participation_fraction);
        let report = validate_assumptions(&problem);
        if let Some(failure) = report.checks.iter().find(|c| !c.passed) {
            return Err(Error::invalid(format!(
                "{}: {}",
                failure.assumption, failure.detail
            )));
        }
        Ok(problem)
    }

    /// Builds a problem without validation, e.g. to feed [`validate_assumptions`].
    pub fn new_unchecked(clients: Vec<QuadraticClient>, participation_fraction: f64) -> Self {
        Self {
            clients,
            participation_fraction,
            phase_shift: 0,
        }
    }

    /// Rotates which block is active at round 1.
    pub fn with_phase_shift(mut self, shift: usize) -> Self {
        self.phase_shift = shift;
        self
    }

    pub fn clients(&self) -> &[QuadraticClient] {
        &self.clients
    }

    pub fn participation_fraction(&self) -> f64 {
        self.participation_fraction
    }

    pub fn phase_shift(&self) -> usize {
        self.phase_shift
    }

    /// Period p = 1/C, rounded to the nearest positive integer.
    pub fn period(&self) -> usize {
        let p = (1.0 / self.participation_fraction).round();
        if p.is_finite() && p >= 1.0 {
            p as usize
        } else {
            1
        }
    }

    /// Shared curvature; taken from the first client.
    pub fn mu(&self) -> f64 {
        self.clients.first().map_or(f64::NAN, |c| c.mu)
    }

    pub fn mean_linear_coefficient(&self) -> f64 {
        mean(self.clients.iter().map(|c| c.b))
    }

    /// Global minimizer -b_bar / mu.
    pub fn optimum(&self) -> f64 {
        -self.mean_linear_coefficient() / self.mu()
    }

    pub fn global_objective(&self, theta: f64) -> f64 {
        mean(self.clients.iter().map(|c| c.value(theta)))
    }

    /// f(theta) - f(theta*) = mu/2 (theta - theta*)^2.
    pub fn optimality_gap(&self, theta: f64) -> f64 {
        let d = theta - self.optimum();
        0.5 * self.mu() * d * d
    }

    /// Client indices active at round `t` (1-based).
    ///
    /// # Panics
    ///
    /// Panics if `t == 0`.
    pub fn active_set(&self, t: u64) -> Range<usize> {
        assert!(t >= 1, "round indices are 1-based");
        let period = self.period();
        let block = self.clients.len() / period;
        let idx = ((t - 1) as usize + self.phase_shift) % period;
        idx * block..(idx + 1) * block
    }

    /// Mean linear coefficient over the clients active at round `t`.
    pub fn active_linear_coefficient(&self, t: u64) -> f64 {
        mean(self.clients[self.active_set(t)].iter().map(|c| c.b))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Two clients with linear coefficients +G and -G: f = mu/2 theta^2, theta* = 0.
pub fn make_two_client_problem(mu: f64, g: f64) -> Result<FederationProblem> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::invalid(format!(
            "heterogeneity G must be finite and >= 0, got {g}"
        )));
    }
    let clients = vec![QuadraticClient::new(mu, g)?, QuadraticClient::new(mu, -g)?];
    FederationProblem::new(clients, 0.5)
}

/// mu * theta + b_bar.
pub fn global_gradient(problem: &FederationProblem, theta: f64) -> f64 {
    problem.mu() * theta + problem.mean_linear_coefficient()
}

/// Mean absolute deviation of the client gradients from the global gradient.
///
/// For quadratics with a shared mu this is independent of theta.
pub fn heterogeneity_bound(problem: &FederationProblem) -> f64 {
    let b_bar = problem.mean_linear_coefficient();
    mean(problem.clients().iter().map(|c| (c.b - b_bar).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    StrongConvexity,
    SharedCurvature,
    BoundedGradientDissimilarity,
    CyclicParticipation,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Assumption::StrongConvexity => "strong convexity",
            Assumption::SharedCurvature => "shared curvature",
            Assumption::BoundedGradientDissimilarity => "bounded gradient dissimilarity",
            Assumption::CyclicParticipation => "cyclic participation",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, assumption: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == assumption)
    }
}

pub fn validate_assumptions(problem: &FederationProblem) -> ValidationReport {
    let clients = problem.clients();
    let mut checks = Vec::with_capacity(4);

    let bad_mu = clients.iter().position(|c| !(c.mu > 0.0 && c.mu.is_finite()));
    checks.push(AssumptionCheck {
        assumption: Assumption::StrongConvexity,
        passed: !clients.is_empty() && bad_mu.is_none(),
        detail: match bad_mu {
            Some(i) => format!("client {i} has mu = {} (need mu > 0)", clients[i].mu),
            None if clients.is_empty() => "no clients".to_string(),
            None => format!("mu = {}", problem.mu()),
        },
    });

    let mu0 = problem.mu();
    let mismatch = clients.iter().position(|c| c.mu != mu0);
    checks.push(AssumptionCheck {
        assumption: Assumption::SharedCurvature,
        passed: mismatch.is_none(),
        detail: match mismatch {
            Some(i) => format!("client {i} has mu = {} but client 0 has {mu0}", clients[i].mu),
            None => "all clients share mu".to_string(),
        },
    });

    let g = heterogeneity_bound(problem);
    checks.push(AssumptionCheck {
        assumption: Assumption::BoundedGradientDissimilarity,
        passed: g.is_finite(),
        detail: format!("G = {g}"),
    });

    let c = problem.participation_fraction();
    let inv = 1.0 / c;
    let period_ok = c > 0.0 && c <= 1.0 && (inv - inv.round()).abs() <= PERIOD_TOLERANCE;
    let divisible = period_ok && !clients.is_empty() && clients.len().is_multiple_of(problem.period());
    checks.push(AssumptionCheck {
        assumption: Assumption::CyclicParticipation,
        passed: period_ok && divisible,
        detail: if !period_ok {
            format!("C = {c}: period 1/C = {inv} is not a positive integer")
        } else if !divisible {
            format!(
                "{} clients not divisible by period {}",
                clients.len(),
                problem.period()
            )
        } else {
            format!("period {}", problem.period())
        },
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_client_construction() {
        let p = make_two_client_problem(1.0, 10.0).unwrap();
        assert_eq!(p.clients()[0].gradient(0.0), 10.0);
        assert_eq!(p.clients()[1].gradient(0.0), -10.0);
        assert_eq!(p.clients()[0].gradient(2.0), 12.0);
        assert_eq!(heterogeneity_bound(&p), 10.0);
        assert_eq!(p.optimum(), 0.0);
        assert_eq!(global_gradient(&p, 3.0), 3.0);
        assert_eq!(global_gradient(&p, 0.0), 0.0);
    }

    #[test]
    fn homogeneous_and_scaled_cases() {
        let p = make_two_client_problem(1.0, 0.0).unwrap();
        assert_eq!(p.clients()[0], p.clients()[1]);
        assert_eq!(heterogeneity_bound(&p), 0.0);
        let p = make_two_client_problem(2.0, 5.0).unwrap();
        assert_eq!(heterogeneity_bound(&p), 5.0);
    }

    #[test]
    fn rejects_non_positive_mu() {
        assert!(matches!(
            make_two_client_problem(0.0, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(make_two_client_problem(-1.0, 1.0).is_err());
        assert!(make_two_client_problem(1.0, -1.0).is_err());
    }

    #[test]
    fn translated_construction() {
        let clients = vec![
            QuadraticClient::new(1.0, 4.0).unwrap(),
            QuadraticClient::new(1.0, -2.0).unwrap(),
        ];
        let p = FederationProblem::new(clients, 0.5).unwrap();
        assert_eq!(p.mean_linear_coefficient(), 1.0);
        assert_eq!(heterogeneity_bound(&p), 3.0);
        assert_eq!(p.optimum(), -1.0);
        assert_eq!(p.optimality_gap(-1.0), 0.0);
    }

    #[test]
    fn active_set_cycles() {
        let p = make_two_client_problem(1.0, 10.0).unwrap();
        assert_eq!(p.active_set(1), 0..1);
        assert_eq!(p.active_set(2), 1..2);
        assert_eq!(p.active_set(3), 0..1);
        let shifted = p.clone().with_phase_shift(1);
        assert_eq!(shifted.active_set(1), 1..2);

        let full = FederationProblem::new(p.clients().to_vec(), 1.0).unwrap();
        for t in 1..5 {
            assert_eq!(full.active_set(t), 0..2);
        }

        let four = FederationProblem::new(vec![QuadraticClient::new(1.0, 0.0).unwrap(); 4], 0.5)
            .unwrap();
        assert_eq!(four.active_set(5), four.active_set(3));
        assert_eq!(four.active_set(5), 0..2);
    }

    #[test]
    fn validation_reports() {
        let p = make_two_client_problem(1.0, 10.0).unwrap();
        assert!(validate_assumptions(&p).all_passed());

        let zero_mu = FederationProblem::new_unchecked(
            vec![QuadraticClient { mu: 0.0, b: 1.0 }, QuadraticClient { mu: 0.0, b: -1.0 }],
            0.5,
        );
        let report = validate_assumptions(&zero_mu);
        assert!(!report.check(Assumption::StrongConvexity).unwrap().passed);
        assert!(report.check(Assumption::CyclicParticipation).unwrap().passed);

        let bad_c = FederationProblem::new_unchecked(p.clients().to_vec(), 0.3);
        let report = validate_assumptions(&bad_c);
        let cyc = report.check(Assumption::CyclicParticipation).unwrap();
        assert!(!cyc.passed);
        assert!(cyc.detail.contains("not a positive integer"));

        let nan_g = FederationProblem::new_unchecked(
            vec![QuadraticClient { mu: 1.0, b: f64::INFINITY }, QuadraticClient { mu: 1.0, b: 0.0 }],
            0.5,
        );
        assert!(!validate_assumptions(&nan_g)
            .check(Assumption::BoundedGradientDissimilarity)
            .unwrap()
            .passed);

        let mixed = FederationProblem::new_unchecked(
            vec![QuadraticClient { mu: 1.0, b: 0.0 }, QuadraticClient { mu: 2.0, b: 0.0 }],
            0.5,
        );
        assert!(!validate_assumptions(&mixed)
            .check(Assumption::SharedCurvature)
            .unwrap()
            .passed);

        let odd = FederationProblem::new_unchecked(vec![QuadraticClient { mu: 1.0, b: 0.0 }; 3], 0.5);
        assert!(!validate_assumptions(&odd).all_passed());
    }

    #[test]
    fn canonical_pair_sums_to_mu_theta_squared() {
        let p = make_two_client_problem(1.7, 3.0).unwrap();
        for theta in [-4.0, -0.5, 0.0, 2.25, 9.0] {
            let sum = p.clients()[0].value(theta) + p.clients()[1].value(theta);
            assert!((sum - 1.7 * theta * theta).abs() <= 1e-12 * (1.0 + sum.abs()));
        }
    }
}
