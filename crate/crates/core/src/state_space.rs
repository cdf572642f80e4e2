//! Linear-system view of the round recurrence.
//!
//! State `z[t] = (theta_t, theta_{t-1})`, dynamics `z[t] = A[t] z[t-1] + B u[t]`,
//! output `y[t] = C z[t] = theta_t`.

use nalgebra::{Matrix2, RowVector2, Vector2};

use crate::algorithms::{AlgoConfig, CoefficientPlan, RoundCoefficients};
use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::problem::FederationProblem;
use crate::schedule::StepSchedule;

/// Time-varying system matrices for one (problem, config) pair.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    plan: CoefficientPlan,
    /// Mean active linear coefficient for odd and even rounds.
    phase_b: [f64; 2],
}

impl SystemMatrices {
    pub fn coefficients_at(&self, t: u64) -> RoundCoefficients {
        self.plan.at(t.max(1))
    }

    /// A[t] = [[p_t, -r_t], [1, 0]].
    pub fn a_at(&self, t: u64) -> Matrix2<f64> {
        let c = self.coefficients_at(t);
        Matrix2::new(c.p, -c.r, 1.0, 0.0)
    }

    /// u[t] = -q_t * b_active(t); equals (-1)^t q_t G for the canonical pair.
    pub fn u_at(&self, t: u64) -> f64 {
        let t = t.max(1);
        -self.coefficients_at(t).q * self.phase_b[((t - 1) % 2) as usize]
    }

    pub fn b_vec(&self) -> Vector2<f64> {
        Vector2::new(1.0, 0.0)
    }

    pub fn c_vec(&self) -> RowVector2<f64> {
        RowVector2::new(1.0, 0.0)
    }
}

pub fn build_system(problem: &FederationProblem, config: &AlgoConfig) -> Result<SystemMatrices> {
    if problem.period() != 2 {
        return Err(Error::UnsupportedConstruction(format!(
            "state-space form needs 2 alternating client groups, got period {}",
            problem.period()
        )));
    }
    config.validate()?;
    Ok(SystemMatrices {
        plan: CoefficientPlan::new(config, problem.mu()),
        phase_b: [
            problem.active_linear_coefficient(1),
            problem.active_linear_coefficient(2),
        ],
    })
}

/// Ordered product A[t] A[t-1] ... A[k+1]; identity when `k == t`.
pub fn state_transition(system: &SystemMatrices, t: u64, k: u64) -> Result<Matrix2<f64>> {
    if k < 1 || k > t {
        return Err(Error::InvalidRange(format!(
            "state transition needs 1 <= k <= t, got t={t}, k={k}"
        )));
    }
    let mut psi = Matrix2::identity();
    for s in k + 1..=t {
        psi = system.a_at(s) * psi;
    }
    Ok(psi)
}

/// C Psi(t, 1) z1, by forward propagation of the state.
pub fn zero_input_response(system: &SystemMatrices, z1: Vector2<f64>, t: u64) -> f64 {
    let mut z = z1;
    for s in 2..=t {
        z = system.a_at(s) * z;
    }
    system.c_vec().dot(&z.transpose())
}

/// Sum over k = 2..t of C Psi(t, k) B u[k].
///
/// Sweeps backward with the row vector w_k = C Psi(t, k), so the whole sum is
/// O(t) and no transition matrix is formed explicitly.
pub fn zero_state_response(system: &SystemMatrices, t: u64) -> f64 {
    let b = system.b_vec();
    let mut w = system.c_vec();
    let mut acc = CompensatedSum::new();
    for k in (2..=t).rev() {
        acc.add((w * b)[0] * system.u_at(k));
        w *= system.a_at(k);
    }
    acc.value()
}

/// Outcome of the second-order Jury test for lambda^2 - p lambda + r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuryVerdict {
    pub stable: bool,
    /// Signed distance of eta to the nearest window edge (negative outside).
    pub margin: f64,
    /// Open interval of stable eta; upper edge is +inf as beta -> 1.
    pub window: (f64, f64),
}

/// Jury conditions for both roots of lambda^2 - p lambda + r inside the unit disc.
pub fn jury_conditions(p: f64, r: f64) -> bool {
    r.abs() < 1.0 && 1.0 - p + r > 0.0 && 1.0 + p + r > 0.0
}

/// Upper edge 2(1 + beta) / (mu (1 - beta)) of the stable step window.
pub fn stability_upper_edge(mu: f64, beta: f64) -> f64 {
    if beta >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * (1.0 + beta) / (mu * (1.0 - beta))
    }
}

/// Constant-step heavy-ball matrix [[1 + beta - mu eta (1 - beta), -beta], [1, 0]].
pub fn momentum_matrix(mu: f64, beta: f64, eta: f64) -> Matrix2<f64> {
    Matrix2::new(1.0 + beta - mu * eta * (1.0 - beta), -beta, 1.0, 0.0)
}

/// Jury test for the constant-step system with server step `eta`
/// (the gradient is scaled by `eta * (1 - beta)`).
pub fn jury_stability(mu: f64, beta: f64, eta: f64) -> JuryVerdict {
    let upper = stability_upper_edge(mu, beta);
    let a = momentum_matrix(mu, beta, eta);
    let stable = beta < 1.0 && jury_conditions(a[(0, 0)], -a[(0, 1)]);
    JuryVerdict {
        stable,
        margin: (eta - 0.0).min(upper - eta),
        window: (0.0, upper),
    }
}

/// Largest eigenvalue modulus of a 2x2 matrix, from trace and determinant.
pub fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    let half_trace = 0.5 * m.trace();
    let det = m.determinant();
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        half_trace.abs() + disc.sqrt()
    } else {
        // complex pair: |lambda|^2 = det
        det.sqrt()
    }
}

/// Amplitude of the period-2 steady state theta_t = (-1)^t a.
pub fn limit_cycle_amplitude(mu: f64, beta: f64, eta: f64, g: f64) -> Result<f64> {
    let verdict = jury_stability(mu, beta, eta);
    if !verdict.stable {
        return Err(Error::NoLimitCycle(format!(
            "eta = {eta} outside stable window ({}, {}) for mu = {mu}, beta = {beta}",
            verdict.window.0, verdict.window.1
        )));
    }
    let step = eta * (1.0 - beta);
    Ok(step * g / (2.0 * (1.0 + beta) - mu * step))
}

/// Period-2 steady state of a constant-coefficient round: q G / (1 + p + r).
pub fn limit_cycle_from_coefficients(c: &RoundCoefficients, g: f64) -> Result<f64> {
    if !jury_conditions(c.p, c.r) {
        return Err(Error::NoLimitCycle(format!(
            "coefficients p = {}, r = {} are not Jury-stable",
            c.p, c.r
        )));
    }
    Ok(c.q * g / (1.0 + c.p + c.r))
}

/// Eigen-coordinates of the limiting momentum matrix [[1 + beta, -beta], [1, 0]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalizedSystem {
    pub beta: f64,
    pub p_mat: Matrix2<f64>,
    pub lambda_mat: Matrix2<f64>,
    pub p_inv: Matrix2<f64>,
    pub w_vec: Vector2<f64>,
}

/// Diagonalizes the limiting matrix. beta = 0 is accepted: the same formulas
/// stay well defined (det P = 1 - beta).
pub fn diagonalize(beta: f64) -> Result<DiagonalizedSystem> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::UnsupportedConstruction(format!(
            "diagonalization needs beta in [0, 1), got {beta}"
        )));
    }
    let s = 1.0 / (beta - 1.0);
    Ok(DiagonalizedSystem {
        beta,
        p_mat: Matrix2::new(1.0, beta, 1.0, 1.0),
        lambda_mat: Matrix2::new(1.0, 0.0, 0.0, beta),
        p_inv: Matrix2::new(-s, beta * s, s, -s),
        w_vec: Vector2::new(1.0, -1.0) / (1.0 - beta),
    })
}

impl DiagonalizedSystem {
    pub fn a_infinity(&self) -> Matrix2<f64> {
        Matrix2::new(1.0 + self.beta, -self.beta, 1.0, 0.0)
    }

    /// Transformed perturbation P^-1 (A[t] - A_inf) P for step `eta_t`.
    pub fn h_at(&self, mu: f64, eta_t: f64) -> Matrix2<f64> {
        -(mu * eta_t) * Matrix2::new(1.0, self.beta, -1.0, -self.beta)
    }

    pub fn to_transformed(&self, z: Vector2<f64>) -> Vector2<f64> {
        self.p_inv * z
    }

    pub fn reconstruct(&self, zbar: Vector2<f64>) -> Vector2<f64> {
        self.p_mat * zbar
    }

    /// One step of the coupled transformed recurrences at round `t`.
    pub fn transformed_step(
        &self,
        zbar_prev: Vector2<f64>,
        t: u64,
        mu: f64,
        schedule: &StepSchedule,
        g: f64,
    ) -> Vector2<f64> {
        let eta_t = schedule.step(t.max(1));
        let drive = eta_t * g * if t.is_multiple_of(2) { 1.0 } else { -1.0 };
        let (z1, z2) = (zbar_prev[0], zbar_prev[1]);
        let coupled = mu * eta_t * (z1 + self.beta * z2);
        Vector2::new(z1 - coupled + drive, self.beta * z2 + coupled - drive)
    }
}

/// theta_t for t = 1..=horizon along the diagonalized path, starting from
/// z[1] = (theta0, theta0).
pub fn diagonalized_trajectory(
    beta: f64,
    mu: f64,
    schedule: &StepSchedule,
    g: f64,
    theta0: f64,
    horizon: u64,
) -> Result<Vec<f64>> {
    let ds = diagonalize(beta)?;
    let mut zbar = ds.to_transformed(Vector2::new(theta0, theta0));
    let mut out = Vec::with_capacity(horizon as usize);
    if horizon >= 1 {
        out.push(theta0);
    }
    for t in 2..=horizon {
        zbar = ds.transformed_step(zbar, t, mu, schedule, g);
        out.push(zbar[0] + beta * zbar[1]);
    }
    Ok(out)
}
