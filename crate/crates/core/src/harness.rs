//! Experiment plumbing behind the command-line tool: config parsing, runs,
//! table reproduction, rate fitting, bound audits and CSV emission.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithms::{simulate, AlgoConfig, Algorithm, RecordPolicy, Trajectory};
use crate::bounds::{
    self, AltSumAudit, BoundLemma, BoundVerdict, DecayRegime,
};
use crate::error::{Error, Result};
use crate::numerics::least_squares;
use crate::problem::make_two_client_problem;
use crate::schedule::StepSchedule;
use crate::state_space::{jury_stability, limit_cycle_amplitude, momentum_matrix, spectral_radius};

/// Fully validated description of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mu: f64,
    pub g: f64,
    pub theta0: f64,
    pub algo: AlgoConfig,
    pub horizon: u64,
    pub record: RecordPolicy,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            g: 10.0,
            theta0: 0.0,
            algo: AlgoConfig {
                algorithm: Algorithm::FedAvgM,
                beta: 0.9,
                local_steps: 1,
                eta_local: 1.0,
                schedule: StepSchedule::Constant { eta: 0.5 },
            },
            horizon: 1_000_000,
            record: RecordPolicy::LogSpaced,
            out: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::invalid(format!("G must be finite and >= 0, got {}", self.g)));
        }
        if !self.theta0.is_finite() {
            return Err(Error::invalid("theta0 must be finite"));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("T must be >= 1"));
        }
        self.algo.validate()
    }
}

/// One problem found while parsing a config; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScheduleKind {
    Constant,
    Polynomial(f64),
    Exponential(f64),
}

fn parse_schedule_kind(value: &str) -> std::result::Result<ScheduleKind, String> {
    let value = value.trim();
    let (kind, arg) = match value.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (value, None),
    };
    let number = |a: Option<&str>, name: &str| -> std::result::Result<f64, String> {
        let a = a.ok_or_else(|| format!("schedule '{kind}' needs a {name} value, e.g. {kind}:0.5"))?;
        a.parse::<f64>()
            .map_err(|_| format!("malformed {name} '{a}' in schedule"))
    };
    match kind.to_ascii_lowercase().as_str() {
        "constant" | "const" if arg.is_none() => Ok(ScheduleKind::Constant),
        "poly" | "polynomial" => {
            let alpha = number(arg, "alpha")?;
            if alpha > 0.0 && alpha.is_finite() {
                Ok(ScheduleKind::Polynomial(alpha))
            } else {
                Err("alpha must be > 0".to_string())
            }
        }
        "exp" | "exponential" => {
            let gamma = number(arg, "gamma")?;
            if gamma > 0.0 && gamma < 1.0 {
                Ok(ScheduleKind::Exponential(gamma))
            } else {
                Err("gamma must be in (0, 1)".to_string())
            }
        }
        _ => Err(format!(
            "unknown schedule '{value}' (expected constant, poly:<alpha> or exp:<gamma>)"
        )),
    }
}

fn build_schedule(kind: ScheduleKind, eta: f64) -> StepSchedule {
    match kind {
        ScheduleKind::Constant => StepSchedule::Constant { eta },
        ScheduleKind::Polynomial(alpha) => StepSchedule::Polynomial { eta, alpha },
        ScheduleKind::Exponential(gamma) => StepSchedule::Exponential { eta, gamma },
    }
}

fn parse_record(value: &str) -> std::result::Result<RecordPolicy, String> {
    match value.trim().to_ascii_lowercase().as_str() {
        "every" | "all" => Ok(RecordPolicy::Every),
        "log" | "logspaced" | "log_spaced" => Ok(RecordPolicy::LogSpaced),
        "final" | "final_only" => Ok(RecordPolicy::FinalOnly),
        other => Err(format!("unknown record policy '{other}' (expected every, log or final)")),
    }
}

/// Parses a float that must also pass `check`.
fn parse_real(
    value: &str,
    key: &str,
    check: impl Fn(f64) -> Option<String>,
) -> std::result::Result<f64, String> {
    let v: f64 = value
        .parse()
        .map_err(|_| format!("malformed value '{value}' for {key}"))?;
    if !v.is_finite() {
        return Err(format!("{key} must be finite"));
    }
    match check(v) {
        Some(msg) => Err(msg),
        None => Ok(v),
    }
}

/// Parses `key = value` lines. `#` starts a comment. Every problem found is
/// reported, each with its line number where one applies.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<ConfigError>> {
    let mut cfg = ExperimentConfig::default();
    let mut eta = 0.5;
    let mut kind = ScheduleKind::Constant;
    let mut errors = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError {
                line: Some(line),
                message: format!("expected 'key = value', got '{content}'"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let positive = |name: &'static str| {
            move |v: f64| (v <= 0.0).then(|| format!("{name} must be > 0"))
        };
        let outcome: std::result::Result<(), String> = match key {
            "mu" => parse_real(value, key, positive("mu")).map(|v| cfg.mu = v),
            "G" | "g" => parse_real(value, key, |v| (v < 0.0).then(|| "G must be >= 0".into()))
                .map(|v| cfg.g = v),
            "theta0" => parse_real(value, key, |_| None).map(|v| cfg.theta0 = v),
            "algorithm" | "algo" => value
                .parse::<Algorithm>()
                .map(|a| cfg.algo.algorithm = a)
                .map_err(|e| e.to_string()),
            "beta" => parse_real(value, key, |v| {
                if v >= 1.0 {
                    Some("beta must be < 1".into())
                } else if v < 0.0 {
                    Some("beta must be >= 0".into())
                } else {
                    None
                }
            })
            .map(|v| cfg.algo.beta = v),
            "J" | "j" => value
                .parse::<u32>()
                .map_err(|_| format!("malformed value '{value}' for J"))
                .and_then(|j| if j >= 1 { Ok(j) } else { Err("J must be >= 1".into()) })
                .map(|j| cfg.algo.local_steps = j),
            "eta_local" => parse_real(value, key, positive("eta_local")).map(|v| cfg.algo.eta_local = v),
            "eta" => parse_real(value, key, positive("eta")).map(|v| eta = v),
            "schedule" => parse_schedule_kind(value).map(|k| kind = k),
            "T" | "t" => parse_horizon(value).map(|t| cfg.horizon = t),
            "record" => parse_record(value).map(|r| cfg.record = r),
            "out" => {
                cfg.out = Some(PathBuf::from(value));
                Ok(())
            }
            "seed" => value
                .parse::<u64>()
                .map_err(|_| format!("malformed value '{value}' for seed"))
                .map(|s| cfg.seed = s),
            other => Err(format!("unknown key '{other}'")),
        };
        if let Err(message) = outcome {
            errors.push(ConfigError {
                line: Some(line),
                message,
            });
        }
    }

    cfg.algo.schedule = build_schedule(kind, eta);
    if errors.is_empty() {
        if let Err(e) = cfg.validate() {
            errors.push(ConfigError {
                line: None,
                message: e.to_string(),
            });
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Accepts plain integers and exact float spellings such as `1e6`.
pub fn parse_horizon(value: &str) -> std::result::Result<u64, String> {
    if let Ok(t) = value.parse::<u64>() {
        return if t >= 1 { Ok(t) } else { Err("T must be >= 1".into()) };
    }
    match value.parse::<f64>() {
        Ok(v) if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("malformed value '{value}' for T (need an integer >= 1)")),
    }
}

/// Formats a float in shortest round-trip scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Runs one experiment.
pub fn run_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let problem = make_two_client_problem(cfg.mu, cfg.g)?;
    simulate(&problem, &cfg.algo, cfg.horizon, cfg.theta0, &cfg.record)
}

/// Runs one experiment and renders the `t,theta,f_gap,eta_t` CSV.
pub fn run(cfg: &ExperimentConfig) -> Result<String> {
    let traj = run_trajectory(cfg)?;
    log::info!(
        "run finished: T = {}, terminal theta = {:e}",
        traj.terminal_t,
        traj.terminal_theta
    );
    Ok(trajectory_csv(&traj, &cfg.algo.schedule))
}

pub fn trajectory_csv(traj: &Trajectory, schedule: &StepSchedule) -> String {
    let mut out = String::from("t,theta,f_gap,eta_t\n");
    for cp in &traj.checkpoints {
        let eta_t = schedule.step_at(cp.t).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            cp.t,
            fmt_f64(cp.theta),
            fmt_f64(cp.f_gap),
            fmt_f64(eta_t)
        );
    }
    out
}

/// Caller-chosen constants for the schedule comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Params {
    pub mu: f64,
    pub eta: f64,
    pub beta: f64,
    pub eta_local: f64,
    pub horizon: u64,
}

impl Default for Table1Params {
    fn default() -> Self {
        Self {
            mu: 1.0,
            eta: 0.5,
            beta: 0.9,
            eta_local: 1.0,
            horizon: 1_000_000,
        }
    }
}

/// (G, theta0) for the five columns of each half of the table.
pub const TABLE1_COLUMNS: [(f64, f64); 5] =
    [(100.0, 0.0), (100.0, 10.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)];

/// Schedules in row order.
pub fn table1_schedules(eta: f64) -> Vec<StepSchedule> {
    let mut rows = vec![StepSchedule::Constant { eta }];
    rows.extend([0.1, 0.5, 1.0, 2.0].map(|alpha| StepSchedule::Polynomial { eta, alpha }));
    rows.extend([0.9999, 0.999, 0.99, 0.9].map(|gamma| StepSchedule::Exponential { eta, gamma }));
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub schedule: StepSchedule,
    pub momentum: [f64; 5],
    pub plain: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub params: Table1Params,
    pub rows: Vec<Table1Row>,
}

impl Table1 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("schedule");
        for half in ["momentum", "plain"] {
            for (g, theta0) in TABLE1_COLUMNS {
                let _ = write!(out, ",{half}_G{g}_theta0_{theta0}");
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.schedule.to_string());
            for v in row.momentum.iter().chain(&row.plain) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn jury_diagnostic(mu: f64, beta: f64, eta: f64) -> Option<String> {
    let v = jury_stability(mu, beta, eta);
    (!v.stable).then(|| {
        format!(
            "beta = {beta}: eta = {eta} outside stable window ({}, {}) (margin {:e}, spectral radius {:e})",
            v.window.0,
            v.window.1,
            v.margin,
            spectral_radius(&momentum_matrix(mu, beta, eta))
        )
    })
}

/// Terminal theta for every (schedule, column, momentum on/off) cell at the
/// given horizon. Cells run in parallel; the output order is fixed.
pub fn reproduce_table1(params: &Table1Params) -> Result<Table1> {
    let effective = params.eta * params.eta_local;
    let problems: Vec<String> = [params.beta, 0.0]
        .iter()
        .filter_map(|&b| jury_diagnostic(params.mu, b, effective))
        .collect();
    if !problems.is_empty() {
        return Err(Error::Unstable(problems.join("; ")));
    }
    let schedules = table1_schedules(params.eta);
    let cells: Vec<(usize, usize, usize)> = (0..schedules.len())
        .flat_map(|r| (0..2).flat_map(move |h| (0..5).map(move |c| (r, h, c))))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(r, h, c)| {
            let (g, theta0) = TABLE1_COLUMNS[c];
            let beta = if h == 0 { params.beta } else { 0.0 };
            let algo = AlgoConfig::new(
                Algorithm::FedAvgM,
                beta,
                1,
                params.eta_local,
                schedules[r],
            )?;
            let problem = make_two_client_problem(params.mu, g)?;
            let traj = simulate(&problem, &algo, params.horizon, theta0, &RecordPolicy::FinalOnly)?;
            log::debug!("table1 cell {r}/{h}/{c}: {:e}", traj.terminal_theta);
            Ok(traj.terminal_theta)
        })
        .collect::<Result<_>>()?;
    let rows = schedules
        .iter()
        .enumerate()
        .map(|(r, &schedule)| {
            let base = r * 10;
            let mut momentum = [0.0; 5];
            let mut plain = [0.0; 5];
            momentum.copy_from_slice(&values[base..base + 5]);
            plain.copy_from_slice(&values[base + 5..base + 10]);
            Table1Row {
                schedule,
                momentum,
                plain,
            }
        })
        .collect();
    Ok(Table1 {
        params: *params,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub rule: &'static str,
    pub eta: f64,
    pub theta0_zero: f64,
    pub theta0_ten: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
}

impl Table2 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta_rule,eta,theta0_0,theta0_10\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.rule,
                fmt_f64(row.eta),
                fmt_f64(row.theta0_zero),
                fmt_f64(row.theta0_ten)
            );
        }
        out
    }
}

/// Critical polynomial decay (alpha = 1) with the two step choices
/// `(1 + beta)/(mu (1 - beta)) - eps` and `1/mu - eps`, G = 10, theta0 in {0, 10}.
pub fn reproduce_table2(mu: f64, beta: f64, epsilon: f64, horizon: u64) -> Result<Table2> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must be in [0, 1), got {beta}")));
    }
    let rules: [(&'static str, f64); 2] = [
        ("(1+beta)/(mu(1-beta))-eps", (1.0 + beta) / (mu * (1.0 - beta)) - epsilon),
        ("1/mu-eps", 1.0 / mu - epsilon),
    ];
    let problem = make_two_client_problem(mu, 10.0)?;
    let rows = rules
        .par_iter()
        .map(|&(rule, eta)| {
            let algo = AlgoConfig::new(
                Algorithm::FedAvgM,
                beta,
                1,
                1.0,
                StepSchedule::polynomial(eta, 1.0)?,
            )?;
            let terminal = |theta0| {
                simulate(&problem, &algo, horizon, theta0, &RecordPolicy::FinalOnly)
                    .map(|t| t.terminal_theta)
            };
            Ok(Table2Row {
                rule,
                eta,
                theta0_zero: terminal(0.0)?,
                theta0_ten: terminal(10.0)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Table2 { rows })
}

/// Least-squares fit of log envelope against log t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub window: (u64, u64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub plateau: bool,
    /// Mean envelope over the window.
    pub plateau_value: f64,
    /// (max - min) / mean of the envelope over the window.
    pub relative_variation: f64,
}

pub const MIN_FIT_POINTS: usize = 10;
const PLATEAU_SLOPE: f64 = 0.02;
const PLATEAU_VARIATION: f64 = 1e-3;

/// Envelope max(|theta_t|, |theta_{t+1}|) at every recorded t inside the window
/// whose successor is also recorded.
pub fn envelope(traj: &Trajectory, window: (u64, u64)) -> Vec<(u64, f64)> {
    traj.checkpoints
        .windows(2)
        .filter(|w| w[1].t == w[0].t + 1 && w[0].t >= window.0 && w[0].t <= window.1)
        .map(|w| (w[0].t, w[0].theta.abs().max(w[1].theta.abs())))
        .collect()
}

pub fn fit_rate(traj: &Trajectory, window: (u64, u64)) -> Result<RateFit> {
    if window.0 < 1 || window.1 <= window.0 {
        return Err(Error::InvalidRange(format!(
            "fit window needs 1 <= t_min < t_max, got {window:?}"
        )));
    }
    let points: Vec<(u64, f64)> = envelope(traj, window)
        .into_iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            got: points.len(),
            need: MIN_FIT_POINTS,
        });
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let fit = least_squares(&xs, &ys).ok_or(Error::InsufficientData {
        got: points.len(),
        need: MIN_FIT_POINTS,
    })?;
    let values = points.iter().map(|(_, e)| *e);
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let mean = values.sum::<f64>() / points.len() as f64;
    let relative_variation = (max - min) / mean;
    Ok(RateFit {
        window,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        samples: points.len(),
        plateau: fit.slope.abs() < PLATEAU_SLOPE && relative_variation < PLATEAU_VARIATION,
        plateau_value: mean,
        relative_variation,
    })
}

impl RateFit {
    pub fn to_csv(&self) -> String {
        format!(
            "t_min,t_max,slope,intercept,r_squared,samples,plateau,plateau_value,relative_variation\n{},{},{},{},{},{},{},{},{}\n",
            self.window.0,
            self.window.1,
            fmt_f64(self.slope),
            fmt_f64(self.intercept),
            fmt_f64(self.r_squared),
            self.samples,
            self.plateau,
            fmt_f64(self.plateau_value),
            fmt_f64(self.relative_variation)
        )
    }
}

/// One named group of audited inequalities with its violation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSummary {
    pub lemma: BoundLemma,
    pub check: &'static str,
    pub samples: usize,
    /// Samples where the stated bound fails.
    pub violations: usize,
    /// Samples where the corrected bound fails (`None` if there is none).
    pub corrected_violations: Option<usize>,
    /// Samples drawn but not asserted because a hypothesis was not met.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rows: Vec<BoundVerdict>,
    pub summaries: Vec<AuditSummary>,
}

/// Exit status for a finished audit.
pub const EXIT_STATED_VIOLATIONS: i32 = 4;
pub const EXIT_CORRECTED_VIOLATIONS: i32 = 5;

impl AuditReport {
    pub fn summary(&self, check: &str) -> Option<&AuditSummary> {
        self.summaries.iter().find(|s| s.check == check)
    }

    /// 0 when every bound holds, 4 when only stated bounds fail, 5 when a
    /// corrected bound fails.
    pub fn exit_code(&self) -> i32 {
        if self
            .summaries
            .iter()
            .any(|s| s.corrected_violations.unwrap_or(0) > 0)
        {
            EXIT_CORRECTED_VIOLATIONS
        } else if self.summaries.iter().any(|s| s.violations > 0) {
            EXIT_STATED_VIOLATIONS
        } else {
            0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "kind,lemma,check,t,s,alpha,mu_eta,beta,n,exact,lower,upper,holds,corrected_lower,corrected_upper,corrected_holds,samples,violations,corrected_violations,skipped\n",
        );
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let p = &r.params;
            let (cl, cu) = r.corrected.unzip();
            let _ = writeln!(
                out,
                "sample,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},,,,",
                r.lemma,
                row_check(r),
                p.t,
                p.s.map(|s| s.to_string()).unwrap_or_default(),
                fmt_f64(p.alpha),
                opt(p.mu_eta),
                opt(p.beta),
                opt(p.n),
                fmt_f64(r.exact),
                fmt_f64(r.lower),
                fmt_f64(r.upper),
                r.holds,
                opt(cl),
                opt(cu),
                r.corrected_holds.map(|b| b.to_string()).unwrap_or_default(),
            );
        }
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "summary,{},{},,,,,,,,,,,,,,{},{},{},{}",
                s.lemma,
                s.check,
                s.samples,
                s.violations,
                s.corrected_violations.map(|v| v.to_string()).unwrap_or_default(),
                s.skipped
            );
        }
        out
    }
}

fn row_check(r: &BoundVerdict) -> &'static str {
    match (r.lemma, r.regime()) {
        (BoundLemma::DecayProduct, DecayRegime::Fast) => "sandwich_fast",
        (BoundLemma::DecayProduct, _) => "sandwich_slow",
        (BoundLemma::AlternatingDecaySum, _) => "window_fast",
        (BoundLemma::WeightedDecaySum, _) => "limit_sandwich",
        (BoundLemma::GrowthProduct, _) => "sandwich",
        (BoundLemma::IntegralComparison, _) => "sum_below_integral",
    }
}

/// Round used for the limit checks of the two summation inequalities.
pub const AUDIT_LIMIT_ROUND: u64 = 10_000;

/// Pinned sample that exhibits the stated slow-regime upper bound failing.
pub const DECAY_COUNTEREXAMPLE: (u64, u64, f64, f64) = (10, 2, 1.0, 0.5);

fn sample_rng(seed: u64, lemma: BoundLemma, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((lemma as u64) << 48) | index);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    let x = rng.gen_range((lo as f64).ln()..=(hi as f64).ln()).exp();
    (x.round() as u64).clamp(lo, hi)
}

/// Exponent drawn for regime `index % 3`: slow, critical or fast.
fn regime_alpha(rng: &mut ChaCha8Rng, index: u64) -> f64 {
    match index % 3 {
        0 => rng.gen_range(0.05..0.95),
        1 => 1.0,
        _ => rng.gen_range(1.05..4.0),
    }
}

fn admissible_mu_eta(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    rng.gen_range(0.001..0.999) * 2f64.powf(alpha)
}

fn range_pair(rng: &mut ChaCha8Rng) -> (u64, u64) {
    let s = log_uniform(rng, 1, 1000);
    let gap = log_uniform(rng, 1, 10_000);
    (s + gap, s)
}

enum Sampled {
    Verdict(BoundVerdict),
    Skipped,
}

fn draw(seed: u64, lemma: BoundLemma, index: u64) -> Result<Sampled> {
    let mut rng = sample_rng(seed, lemma, index);
    let rng = &mut rng;
    let verdict = match lemma {
        BoundLemma::IntegralComparison => {
            let alpha = rng.gen_range(0.05..4.0);
            let (b, a) = range_pair(rng);
            bounds::integral_comparison(a, b, alpha)?
        }
        BoundLemma::DecayProduct => {
            let alpha = regime_alpha(rng, index);
            let mu_eta = admissible_mu_eta(rng, alpha);
            let (t, s) = range_pair(rng);
            bounds::decay_product_verdict(t, s, alpha, mu_eta)?
        }
        BoundLemma::GrowthProduct => {
            let alpha = regime_alpha(rng, index);
            let mu_eta = rng.gen_range(0.001..4.0);
            let beta = rng.gen_range(0.01..0.99);
            let (t, s) = range_pair(rng);
            bounds::growth_product_verdict(t, s, alpha, mu_eta, beta)?
        }
        BoundLemma::WeightedDecaySum => {
            let alpha = rng.gen_range(1.05..4.0);
            let mu_eta = admissible_mu_eta(rng, alpha);
            bounds::sum_s1(AUDIT_LIMIT_ROUND, alpha, mu_eta)?.verdict
        }
        BoundLemma::AlternatingDecaySum => {
            let alpha = rng.gen_range(1.05..4.0);
            let n = rng.gen_range(0.05..4.0);
            let mu_eta = admissible_mu_eta(rng, alpha);
            match bounds::alternating_window_verdict(AUDIT_LIMIT_ROUND, alpha, n, mu_eta)? {
                AltSumAudit::Fast(v) => v,
                _ => return Ok(Sampled::Skipped),
            }
        }
    };
    Ok(Sampled::Verdict(verdict))
}

/// Audits every auxiliary inequality on random admissible samples.
///
/// Each sample has its own generator derived from (seed, lemma, index), so the
/// report does not depend on the number of worker threads. The decaying
/// product draws `samples_per_lemma` samples in each exponent regime and also
/// includes the pinned counterexample for the slow-regime upper bound.
pub fn audit_bounds(seed: u64, samples_per_lemma: usize) -> Result<AuditReport> {
    if samples_per_lemma < 1 {
        return Err(Error::invalid("need at least one sample per lemma"));
    }
    let n = samples_per_lemma as u64;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();

    for lemma in BoundLemma::ALL {
        let count = match lemma {
            BoundLemma::DecayProduct | BoundLemma::GrowthProduct => 3 * n,
            _ => n,
        };
        let drawn: Vec<Sampled> = (0..count)
            .into_par_iter()
            .map(|i| draw(seed, lemma, i))
            .collect::<Result<_>>()?;
        let skipped = drawn.iter().filter(|d| matches!(d, Sampled::Skipped)).count();
        let mut verdicts: Vec<BoundVerdict> = drawn
            .into_iter()
            .filter_map(|d| match d {
                Sampled::Verdict(v) => Some(v),
                Sampled::Skipped => None,
            })
            .collect();
        if lemma == BoundLemma::DecayProduct {
            let (t, s, alpha, mu_eta) = DECAY_COUNTEREXAMPLE;
            verdicts.insert(0, bounds::decay_product_verdict(t, s, alpha, mu_eta)?);
        }
        summaries.extend(summarize(lemma, &verdicts, skipped));
        rows.extend(verdicts);
    }
    let report = AuditReport { rows, summaries };
    for s in &report.summaries {
        log::info!(
            "audit {}/{}: {} samples, {} stated violations, corrected {:?}",
            s.lemma,
            s.check,
            s.samples,
            s.violations,
            s.corrected_violations
        );
    }
    Ok(report)
}

fn summarize(lemma: BoundLemma, verdicts: &[BoundVerdict], skipped: usize) -> Vec<AuditSummary> {
    let summary = |check, subset: &[&BoundVerdict], stated: &dyn Fn(&BoundVerdict) -> bool, corrected: bool| {
        AuditSummary {
            lemma,
            check,
            samples: subset.len(),
            violations: subset.iter().filter(|v| !stated(v)).count(),
            corrected_violations: corrected
                .then(|| subset.iter().filter(|v| v.corrected_holds == Some(false)).count()),
            skipped,
        }
    };
    let all: Vec<&BoundVerdict> = verdicts.iter().collect();
    match lemma {
        BoundLemma::DecayProduct => {
            let slow: Vec<&BoundVerdict> = all
                .iter()
                .copied()
                .filter(|v| v.regime() != DecayRegime::Fast)
                .collect();
            let fast: Vec<&BoundVerdict> = all
                .iter()
                .copied()
                .filter(|v| v.regime() == DecayRegime::Fast)
                .collect();
            vec![
                summary("lower", &all, &|v| v.lower_holds, false),
                summary("upper_slow", &slow, &|v| v.upper_holds, true),
                summary("upper_fast", &fast, &|v| v.upper_holds, true),
            ]
        }
        BoundLemma::WeightedDecaySum => vec![
            summary("limit_lower", &all, &|v| v.lower_holds, true),
            summary("limit_upper", &all, &|v| v.upper_holds, false),
        ],
        BoundLemma::AlternatingDecaySum => vec![
            summary("window_lower", &all, &|v| v.lower_holds, false),
            summary("window_upper", &all, &|v| v.upper_holds, true),
        ],
        BoundLemma::IntegralComparison => vec![summary("sum_below_integral", &all, &|v| v.holds, false)],
        BoundLemma::GrowthProduct => vec![summary("sandwich", &all, &|v| v.holds, false)],
    }
}

/// Jury window, spectral radius and limit-cycle amplitude for a constant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub mu: f64,
    pub beta: f64,
    pub eta: f64,
    pub window: (f64, f64),
    pub stable: bool,
    pub margin: f64,
    pub spectral_radius: f64,
    /// Amplitude per unit G; `None` outside the window.
    pub amplitude_per_g: Option<f64>,
}

pub fn stability(mu: f64, beta: f64, eta: f64) -> Result<StabilityReport> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
    }
    let v = jury_stability(mu, beta, eta);
    Ok(StabilityReport {
        mu,
        beta,
        eta,
        window: v.window,
        stable: v.stable,
        margin: v.margin,
        spectral_radius: spectral_radius(&momentum_matrix(mu, beta, eta)),
        amplitude_per_g: limit_cycle_amplitude(mu, beta, eta, 1.0).ok(),
    })
}

impl StabilityReport {
    pub fn to_csv(&self) -> String {
        format!(
            "mu,beta,eta,window_low,window_high,stable,margin,spectral_radius,amplitude_per_G\n{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(self.mu),
            fmt_f64(self.beta),
            fmt_f64(self.eta),
            fmt_f64(self.window.0),
            fmt_f64(self.window.1),
            self.stable,
            fmt_f64(self.margin),
            fmt_f64(self.spectral_radius),
            self.amplitude_per_g.map(fmt_f64).unwrap_or_default()
        )
    }
}
