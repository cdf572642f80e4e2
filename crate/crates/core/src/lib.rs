//! Simulation and analysis laboratory for heavy-ball momentum in federated
//! optimization under cyclic partial participation.
//!
//! The crate reproduces the exact scalar dynamics of FedAvgM and FedCM on the
//! two-client heterogeneous quadratic construction, views them as a
//! discrete-time linear system (stability, limit cycles, decay exponents), and
//! audits the auxiliary product/series bounds used in the convergence analysis.
//!
//! Module map:
//!
//! * [`problem`] client objectives, cyclic participation, assumption checks
//! * [`schedule`] server step-size schedules
//! * [`algorithms`] FedAvgM / FedCM one-round coefficients, local unrolls, simulation
//! * [`state_space`] system matrices, transition products, Jury test, limit cycle
//! * [`bounds`] Psi products, Hurwitz zeta, summation lemmas, rate predictions
//! * [`harness`] config parsing, experiments, table reproduction, rate fits, audits

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod problem;
pub mod schedule;
pub mod state_space;

pub use algorithms::{
    coefficients, local_unroll, round_update, simulate, AlgoConfig, Algorithm, RecordPolicy,
    RoundCoefficients, Trajectory,
};
pub use error::{Error, Result};
pub use problem::{make_two_client_problem, FederationProblem, QuadraticClient};
pub use schedule::StepSchedule;
