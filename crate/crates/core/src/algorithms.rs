//! FedAvgM and FedCM on scalar quadratics: one-round coefficients, explicit
//! local unrolls, and full simulation.
//!
//! Every round reduces to the second-order recurrence
//! `theta_t = p * theta_{t-1} - q * b_active(t) - r * theta_{t-2}`,
//! where `b_active(t)` is the mean linear coefficient of the clients sampled at
//! round `t`. For the two-client construction that is `(-1)^t q G`.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::geometric_sum;
use crate::problem::{FederationProblem, QuadraticClient};
use crate::schedule::StepSchedule;

/// |theta| above this is reported as divergence.
pub const DIVERGENCE_GUARD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Server-side heavy-ball momentum on the averaged pseudo-gradient.
    FedAvgM,
    /// Server momentum injected into every local client step.
    FedCM,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::FedAvgM => "fedavgm",
            Algorithm::FedCM => "fedcm",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fedavgm" | "fedavg" | "avgm" => Ok(Algorithm::FedAvgM),
            "fedcm" | "cm" => Ok(Algorithm::FedCM),
            other => Err(Error::invalid(format!(
                "unknown algorithm '{other}' (expected fedavgm or fedcm)"
            ))),
        }
    }
}

/// Optimizer hyper-parameters. Plain FedAvg / IGD is `beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub beta: f64,
    pub local_steps: u32,
    pub eta_local: f64,
    pub schedule: StepSchedule,
}

impl AlgoConfig {
    pub fn new(
        algorithm: Algorithm,
        beta: f64,
        local_steps: u32,
        eta_local: f64,
        schedule: StepSchedule,
    ) -> Result<Self> {
        let config = Self {
            algorithm,
            beta,
            local_steps,
            eta_local,
            schedule,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.beta < 1.0) {
            return Err(Error::invalid("beta must be < 1"));
        }
        if self.local_steps < 1 {
            return Err(Error::invalid("J must be >= 1"));
        }
        if !(self.eta_local > 0.0 && self.eta_local.is_finite()) {
            return Err(Error::invalid(format!(
                "eta_local must be > 0, got {}",
                self.eta_local
            )));
        }
        self.schedule.validate()
    }

    /// Local step actually applied to client gradients.
    fn effective_local_step(&self) -> f64 {
        match self.algorithm {
            Algorithm::FedAvgM => self.eta_local,
            Algorithm::FedCM => self.eta_local * (1.0 - self.beta),
        }
    }
}

/// Coefficients of one round of the scalar recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCoefficients {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

/// Round-independent pieces of the coefficients, computed once per config.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoefficientPlan {
    mu: f64,
    beta: f64,
    eta_local: f64,
    /// Sum_{j<J} (1 - mu * local_step)^j
    drift_sum: f64,
    /// Momentum weight r (constant in t for both algorithms).
    r: f64,
    schedule: StepSchedule,
}

impl CoefficientPlan {
    pub(crate) fn new(config: &AlgoConfig, mu: f64) -> Self {
        let drift_sum = geometric_sum(mu * config.effective_local_step(), config.local_steps);
        let r = match config.algorithm {
            Algorithm::FedAvgM => config.beta,
            Algorithm::FedCM => config.beta / f64::from(config.local_steps) * drift_sum,
        };
        Self {
            mu,
            beta: config.beta,
            eta_local: config.eta_local,
            drift_sum,
            r,
            schedule: config.schedule,
        }
    }

    /// Uses (1 - x)^J - 1 = -x * Sum_{j<J}(1 - x)^j, so p = 1 + r - mu q for both
    /// algorithms. With the products grouped this way, J = 1 gives bit-identical
    /// coefficients for any two configs with the same eta_t * eta_l.
    #[inline]
    pub(crate) fn at(&self, t: u64) -> RoundCoefficients {
        let eta_t = self.schedule.step(t);
        let q = ((eta_t * self.eta_local) * (1.0 - self.beta)) * self.drift_sum;
        let p = (1.0 + self.r) - self.mu * q;
        RoundCoefficients { p, q, r: self.r }
    }
}

/// One-round coefficients (p, q, r) at round `t`.
pub fn coefficients(config: &AlgoConfig, mu: f64, t: u64) -> RoundCoefficients {
    CoefficientPlan::new(config, mu).at(t.max(1))
}

/// J local steps of one client starting from the current server model.
///
/// For FedCM the server momentum `(beta/J)/eta_t * (theta_start - theta_prev2)`
/// is added at every local step.
pub fn local_unroll(
    client: &QuadraticClient,
    theta_start: f64,
    config: &AlgoConfig,
    t: u64,
    theta_prev2: f64,
) -> f64 {
    let step = config.effective_local_step();
    let correction = match config.algorithm {
        Algorithm::FedAvgM => 0.0,
        Algorithm::FedCM => {
            let beta_hat = config.beta / f64::from(config.local_steps);
            if beta_hat == 0.0 {
                0.0
            } else {
                beta_hat / config.schedule.step(t.max(1)) * (theta_start - theta_prev2)
            }
        }
    };
    let mut theta = theta_start;
    for _ in 0..config.local_steps {
        theta = theta - step * client.gradient(theta) + correction;
    }
    theta
}

/// One round computed step by step: local unrolls on the active clients,
/// averaging, then the server rule of the chosen algorithm.
pub fn explicit_round(
    theta_prev: f64,
    theta_prev2: f64,
    problem: &FederationProblem,
    config: &AlgoConfig,
    t: u64,
) -> f64 {
    let active = &problem.clients()[problem.active_set(t)];
    let mean_local = active
        .iter()
        .map(|c| local_unroll(c, theta_prev, config, t, theta_prev2))
        .sum::<f64>()
        / active.len() as f64;
    let eta_t = config.schedule.step(t);
    match config.algorithm {
        Algorithm::FedAvgM => {
            let beta = config.beta;
            let eta_server = eta_t * (1.0 - beta);
            theta_prev * (1.0 + beta - eta_server) + eta_server * mean_local - beta * theta_prev2
        }
        Algorithm::FedCM => theta_prev * (1.0 - eta_t) + eta_t * mean_local,
    }
}

fn require_two_phase(problem: &FederationProblem) -> Result<()> {
    if problem.period() != 2 {
        return Err(Error::UnsupportedConstruction(format!(
            "closed-form round update needs exactly 2 alternating client groups, got period {}",
            problem.period()
        )));
    }
    Ok(())
}

/// Closed-form round update `p theta_{t-1} - q b_active(t) - r theta_{t-2}`.
pub fn round_update(
    theta_prev: f64,
    theta_prev2: f64,
    problem: &FederationProblem,
    config: &AlgoConfig,
    t: u64,
) -> Result<f64> {
    require_two_phase(problem)?;
    let c = coefficients(config, problem.mu(), t);
    Ok(c.p * theta_prev - c.q * problem.active_linear_coefficient(t) - c.r * theta_prev2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub theta: f64,
    pub f_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub terminal_theta: f64,
    /// theta at round `terminal_t - 1` (equal to theta0 when `terminal_t == 1`).
    pub penultimate_theta: f64,
    pub terminal_t: u64,
}

impl Trajectory {
    pub fn theta_at(&self, t: u64) -> Option<f64> {
        self.checkpoints
            .binary_search_by_key(&t, |c| c.t)
            .ok()
            .map(|i| self.checkpoints[i].theta)
    }
}

/// Which rounds a simulation keeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RecordPolicy {
    Every,
    /// Every round up to 100, then rounds nearest 100 * 10^(k/20) together
    /// with their successors, plus the last two rounds.
    #[default]
    LogSpaced,
    FinalOnly,
    Rounds(BTreeSet<u64>),
}

impl RecordPolicy {
    /// Sorted rounds in `1..=horizon` this policy records.
    pub fn rounds(&self, horizon: u64) -> Vec<u64> {
        let mut set = BTreeSet::new();
        match self {
            RecordPolicy::Every => return (1..=horizon).collect(),
            RecordPolicy::FinalOnly => {}
            RecordPolicy::Rounds(rounds) => set.extend(rounds.iter().copied()),
            RecordPolicy::LogSpaced => {
                set.extend(1..=horizon.min(100));
                for k in 1.. {
                    let target = (100.0 * 10f64.powf(k as f64 / 20.0)).round() as u64;
                    if target > horizon {
                        break;
                    }
                    set.insert(target);
                    set.insert(target + 1);
                }
                set.insert(horizon.saturating_sub(1));
            }
        }
        set.insert(horizon);
        set.into_iter().filter(|&t| t >= 1 && t <= horizon).collect()
    }
}

impl fmt::Display for RecordPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordPolicy::Every => f.write_str("every"),
            RecordPolicy::LogSpaced => f.write_str("log"),
            RecordPolicy::FinalOnly => f.write_str("final"),
            RecordPolicy::Rounds(r) => write!(f, "{} rounds", r.len()),
        }
    }
}

/// Runs `horizon` rounds of the closed-form recurrence from theta^1 = theta^0 = theta0.
pub fn simulate(
    problem: &FederationProblem,
    config: &AlgoConfig,
    horizon: u64,
    theta0: f64,
    policy: &RecordPolicy,
) -> Result<Trajectory> {
    require_two_phase(problem)?;
    let plan = CoefficientPlan::new(config, problem.mu());
    let b = [
        problem.active_linear_coefficient(1),
        problem.active_linear_coefficient(2),
    ];
    run(problem, config, horizon, theta0, policy, |prev, prev2, t| {
        let c = plan.at(t);
        // rounds 1, 3, 5, ... share phase 0
        c.p * prev - c.q * b[((t - 1) % 2) as usize] - c.r * prev2
    })
}

/// Same as [`simulate`] but every round goes through [`explicit_round`].
/// Works for any valid participation period.
pub fn simulate_explicit(
    problem: &FederationProblem,
    config: &AlgoConfig,
    horizon: u64,
    theta0: f64,
    policy: &RecordPolicy,
) -> Result<Trajectory> {
    run(problem, config, horizon, theta0, policy, |prev, prev2, t| {
        explicit_round(prev, prev2, problem, config, t)
    })
}

fn run(
    problem: &FederationProblem,
    config: &AlgoConfig,
    horizon: u64,
    theta0: f64,
    policy: &RecordPolicy,
    mut step: impl FnMut(f64, f64, u64) -> f64,
) -> Result<Trajectory> {
    config.validate()?;
    if horizon < 1 {
        return Err(Error::invalid("horizon T must be >= 1"));
    }
    if !theta0.is_finite() {
        return Err(Error::invalid(format!("theta0 must be finite, got {theta0}")));
    }
    let targets = policy.rounds(horizon);
    let mut next = targets.iter().copied().peekable();
    let mut checkpoints = Vec::with_capacity(targets.len());
    let mut record = |t: u64, theta: f64, next: &mut std::iter::Peekable<_>| {
        if next.peek() == Some(&t) {
            next.next();
            checkpoints.push(Checkpoint {
                t,
                theta,
                f_gap: problem.optimality_gap(theta),
            });
        }
    };

    let (mut prev2, mut prev) = (theta0, theta0);
    record(1, theta0, &mut next);
    for t in 2..=horizon {
        let theta = step(prev, prev2, t);
        if !(theta.abs() <= DIVERGENCE_GUARD) {
            return Err(Error::Divergence {
                round: t,
                magnitude: theta.abs(),
            });
        }
        record(t, theta, &mut next);
        prev2 = prev;
        prev = theta;
    }
    Ok(Trajectory {
        checkpoints,
        terminal_theta: prev,
        penultimate_theta: prev2,
        terminal_t: horizon,
    })
}

/// Sampling box for [`qt_ordering_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBox {
    pub beta: (f64, f64),
    pub max_local_steps: u32,
    /// Range of mu * eta_l; must lie inside (0, 1).
    pub mu_eta_local: (f64, f64),
    pub eta_server: (f64, f64),
}

impl Default for ParameterBox {
    fn default() -> Self {
        Self {
            beta: (0.0, 0.999),
            max_local_steps: 20,
            mu_eta_local: (1e-6, 0.999),
            eta_server: (1e-3, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtSample {
    pub beta: f64,
    pub local_steps: u32,
    pub eta_local: f64,
    pub eta_server: f64,
    pub q_fedcm: f64,
    pub q_fedavgm: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QtOrderingReport {
    pub samples: usize,
    pub violations: Vec<QtSample>,
    /// Largest |q - baseline| / baseline over the J = 1 samples.
    pub max_single_step_gap: f64,
}

/// Relative rounding slack allowed in the ordering comparisons.
const ORDERING_SLACK: f64 = 1e-15;

/// Checks q(FedCM) >= q(FedAvgM) >= eta_t * eta_l * (1 - beta) on random samples.
pub fn qt_ordering_check(
    mu: f64,
    bounds: &ParameterBox,
    samples: usize,
    seed: u64,
) -> Result<QtOrderingReport> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
    }
    let (lo, hi) = bounds.mu_eta_local;
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::InvalidRange("mu * eta_l range must lie inside (0, 1)".into()));
    }
    if !(bounds.beta.0 >= 0.0 && bounds.beta.1 < 1.0 && bounds.beta.0 <= bounds.beta.1) {
        return Err(Error::InvalidRange("beta range must lie inside [0, 1)".into()));
    }
    if bounds.max_local_steps < 1 || !(bounds.eta_server.0 > 0.0) {
        return Err(Error::InvalidRange("J and eta_t ranges must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut max_single_step_gap: f64 = 0.0;
    for _ in 0..samples {
        let beta = rng.gen_range(bounds.beta.0..=bounds.beta.1);
        let local_steps = rng.gen_range(1..=bounds.max_local_steps);
        let eta_local = rng.gen_range(lo..=hi) / mu;
        let eta_server = rng.gen_range(bounds.eta_server.0..=bounds.eta_server.1);
        let schedule = StepSchedule::Constant { eta: eta_server };
        let q_of = |algorithm| {
            let config = AlgoConfig {
                algorithm,
                beta,
                local_steps,
                eta_local,
                schedule,
            };
            coefficients(&config, mu, 1).q
        };
        let q_fedcm = q_of(Algorithm::FedCM);
        let q_fedavgm = q_of(Algorithm::FedAvgM);
        let baseline = eta_server * eta_local * (1.0 - beta);
        let sample = QtSample {
            beta,
            local_steps,
            eta_local,
            eta_server,
            q_fedcm,
            q_fedavgm,
            baseline,
        };
        let ordered = q_fedcm >= q_fedavgm * (1.0 - ORDERING_SLACK)
            && q_fedavgm >= baseline * (1.0 - ORDERING_SLACK);
        if local_steps == 1 {
            let gap = ((q_fedcm - baseline).abs()).max((q_fedavgm - baseline).abs()) / baseline;
            max_single_step_gap = max_single_step_gap.max(gap);
        }
        if !ordered {
            violations.push(sample);
        }
    }
    Ok(QtOrderingReport {
        samples,
        violations,
        max_single_step_gap,
    })
}
