//! Decay/growth products, Hurwitz zeta, the auxiliary summation bounds used in
//! the convergence analysis, and asymptotic rate predictions.
//!
//! Two products drive everything here:
//!
//! * `psi1(t, s) = prod_{k=s+1..t} (1 - mu_eta / k^alpha)` (decaying mode)
//! * `psi2(t, s) = prod_{k=s+1..t} beta (1 + mu_eta / k^alpha)` (momentum mode)
//!
//! Bounds come in a "stated" form and, where the stated form is not valid for
//! every admissible input, a "corrected" form. Both are always reported.

use std::fmt;

use crate::algorithms::AlgoConfig;
use crate::error::{Error, Result};
use crate::numerics::{log_log_fit, CompensatedSum};
use crate::schedule::StepSchedule;

/// Absolute slack used in every bound comparison.
pub const BOUND_SLACK: f64 = 1e-14;

/// Below this magnitude products switch to log-space accumulation.
const LOG_SWITCH: f64 = 1e-280;

/// Width of the bracket on the zeta tail at which evaluation stops.
const ZETA_TOLERANCE: f64 = 1e-12;

/// |alpha - 1| below this is treated as the critical exponent.
const CRITICAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayRegime {
    /// 0 < alpha < 1
    Slow,
    /// alpha = 1
    Critical,
    /// alpha > 1
    Fast,
}

impl DecayRegime {
    pub fn of(alpha: f64) -> Self {
        if (alpha - 1.0).abs() <= CRITICAL_TOLERANCE {
            DecayRegime::Critical
        } else if alpha < 1.0 {
            DecayRegime::Slow
        } else {
            DecayRegime::Fast
        }
    }
}

impl fmt::Display for DecayRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayRegime::Slow => "slow",
            DecayRegime::Critical => "critical",
            DecayRegime::Fast => "fast",
        })
    }
}

fn check_range(t: u64, s: u64) -> Result<()> {
    if s < 1 || s >= t {
        return Err(Error::InvalidRange(format!("need 1 <= s < t, got s={s}, t={t}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("alpha must be > 0"))
    }
}

fn check_psi1_hypothesis(alpha: f64, mu_eta: f64) -> Result<()> {
    check_alpha(alpha)?;
    let cap = 2f64.powf(alpha);
    if !(mu_eta >= 0.0) || mu_eta >= cap {
        return Err(Error::HypothesisViolated(format!(
            "need 0 <= mu*eta < 2^alpha = {cap}, got {mu_eta}"
        )));
    }
    Ok(())
}

/// Product of `factor(k)` for k = s+1..=t, switching to log space when the
/// running product gets close to underflow.
fn product(t: u64, s: u64, factor: impl Fn(f64) -> f64) -> f64 {
    let mut prod = 1.0f64;
    let mut k = s + 1;
    while k <= t {
        prod *= factor(k as f64);
        k += 1;
        if prod == 0.0 || !prod.is_finite() {
            return prod;
        }
        if prod.abs() < LOG_SWITCH {
            let sign = prod.signum();
            let mut log_sum = CompensatedSum::new();
            log_sum.add(prod.abs().ln());
            let mut negative = sign < 0.0;
            while k <= t {
                let f = factor(k as f64);
                if f == 0.0 {
                    return 0.0;
                }
                negative ^= f < 0.0;
                log_sum.add(f.abs().ln());
                k += 1;
            }
            let magnitude = log_sum.value().exp();
            return if negative { -magnitude } else { magnitude };
        }
    }
    prod
}

fn log_product(t: u64, s: u64, factor: impl Fn(f64) -> f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for k in s + 1..=t {
        acc.add(factor(k as f64).ln());
    }
    acc.value()
}

/// prod_{k=s+1..t} (1 - mu_eta / k^alpha).
pub fn psi1_exact(t: u64, s: u64, alpha: f64, mu_eta: f64) -> Result<f64> {
    check_range(t, s)?;
    check_alpha(alpha)?;
    Ok(product(t, s, |k| 1.0 - mu_eta / k.powf(alpha)))
}

/// ln psi1, for inputs where every factor is positive.
pub fn psi1_ln(t: u64, s: u64, alpha: f64, mu_eta: f64) -> Result<f64> {
    check_range(t, s)?;
    check_psi1_hypothesis(alpha, mu_eta)?;
    Ok(log_product(t, s, |k| 1.0 - mu_eta / k.powf(alpha)))
}

/// prod_{k=s+1..t} beta (1 + mu_eta / k^alpha).
pub fn psi2_exact(t: u64, s: u64, alpha: f64, mu_eta: f64, beta: f64) -> Result<f64> {
    check_range(t, s)?;
    check_alpha(alpha)?;
    Ok(product(t, s, |k| beta * (1.0 + mu_eta / k.powf(alpha))))
}

/// ln psi2, for beta > 0 and mu_eta >= 0.
pub fn psi2_ln(t: u64, s: u64, alpha: f64, mu_eta: f64, beta: f64) -> Result<f64> {
    check_range(t, s)?;
    check_alpha(alpha)?;
    if !(beta > 0.0) || !(mu_eta >= 0.0) {
        return Err(Error::invalid("log form needs beta > 0 and mu*eta >= 0"));
    }
    let ln_beta = beta.ln();
    let mut acc = CompensatedSum::new();
    for k in s + 1..=t {
        acc.add(ln_beta);
        acc.add((mu_eta / (k as f64).powf(alpha)).ln_1p());
    }
    Ok(acc.value())
}

/// Integral of x^-alpha over [a, b].
fn power_integral(a: f64, b: f64, alpha: f64) -> f64 {
    match DecayRegime::of(alpha) {
        DecayRegime::Critical => (b / a).ln(),
        _ => (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha),
    }
}

/// 2^alpha mu_eta / (2^alpha - mu_eta): the constant in the lower bounds.
fn lower_rate(alpha: f64, mu_eta: f64) -> f64 {
    let cap = 2f64.powf(alpha);
    cap * mu_eta / (cap - mu_eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psi1Bounds {
    pub regime: DecayRegime,
    pub lower: f64,
    pub upper: f64,
    /// Upper bound obtained from the integral comparison run in the valid
    /// direction: limits (s+1, t+1) for alpha <= 1, exp(-mu_eta/(s+1)^alpha)
    /// for alpha > 1.
    pub corrected_upper: f64,
}

pub fn psi1_bounds(t: u64, s: u64, alpha: f64, mu_eta: f64) -> Result<Psi1Bounds> {
    check_range(t, s)?;
    check_psi1_hypothesis(alpha, mu_eta)?;
    let (tf, sf) = (t as f64, s as f64);
    let c = lower_rate(alpha, mu_eta);
    let regime = DecayRegime::of(alpha);
    let bounds = match regime {
        DecayRegime::Slow | DecayRegime::Critical => {
            let stated = power_integral(sf, tf, alpha);
            let shifted = power_integral(sf + 1.0, tf + 1.0, alpha);
            Psi1Bounds {
                regime,
                lower: (-c * stated).exp(),
                upper: (-mu_eta * stated).exp(),
                corrected_upper: (-mu_eta * shifted).exp(),
            }
        }
        DecayRegime::Fast => Psi1Bounds {
            regime,
            lower: (-c * hurwitz_zeta(alpha, s + 1)?).exp(),
            upper: (-mu_eta / 2f64.powf(alpha)).exp(),
            corrected_upper: (-mu_eta / (sf + 1.0).powf(alpha)).exp(),
        },
    };
    Ok(bounds)
}

/// Upper bound on psi2; the lower bound is 0 (strict).
pub fn psi2_upper(t: u64, s: u64, alpha: f64, mu_eta: f64, beta: f64) -> Result<f64> {
    Ok(psi2_ln_upper(t, s, alpha, mu_eta, beta)?.exp())
}

/// ln of [`psi2_upper`], usable when the bound itself underflows.
pub fn psi2_ln_upper(t: u64, s: u64, alpha: f64, mu_eta: f64, beta: f64) -> Result<f64> {
    check_range(t, s)?;
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta must be in (0, 1), got {beta}")));
    }
    let (tf, sf) = (t as f64, s as f64);
    let growth = match DecayRegime::of(alpha) {
        DecayRegime::Fast => mu_eta * hurwitz_zeta(alpha, s + 1)?,
        _ => mu_eta * power_integral(sf, tf, alpha),
    };
    Ok((t - s) as f64 * beta.ln() + growth)
}

/// (lower, upper) with lower = 0.
pub fn psi2_bounds(t: u64, s: u64, alpha: f64, mu_eta: f64, beta: f64) -> Result<(f64, f64)> {
    Ok((0.0, psi2_upper(t, s, alpha, mu_eta, beta)?))
}

/// Hurwitz zeta sum_{k>=s} k^-alpha for alpha > 1.
///
/// Sums terms directly up to K and brackets the tail with the trapezoid and
/// midpoint comparisons for a convex summand:
/// `int_K^inf f + f(K)/2 <= tail <= int_{K-1/2}^inf f`. K doubles until the
/// bracket is narrower than 1e-12; the midpoint is returned.
pub fn hurwitz_zeta(alpha: f64, s: u64) -> Result<f64> {
    if !(alpha > 1.0 + 1e-9) || !alpha.is_finite() {
        return Err(Error::DivergentSeries(alpha));
    }
    if s < 1 {
        return Err(Error::invalid("zeta offset must be >= 1"));
    }
    let tail_integral = |x: f64| x.powf(1.0 - alpha) / (alpha - 1.0);
    let mut head = CompensatedSum::new();
    let mut next = s;
    let mut cutoff = s.max(16);
    loop {
        while next < cutoff {
            head.add((next as f64).powf(-alpha));
            next += 1;
        }
        let k = cutoff as f64;
        let lo = tail_integral(k) + 0.5 * k.powf(-alpha);
        let hi = tail_integral(k - 0.5);
        if hi - lo < ZETA_TOLERANCE || cutoff >= 1 << 40 {
            return Ok(head.value() + 0.5 * (lo + hi));
        }
        cutoff *= 2;
    }
}

/// Riemann zeta as zeta_H(alpha, 1).
pub fn riemann_zeta(alpha: f64) -> Result<f64> {
    hurwitz_zeta(alpha, 1)
}

/// Which auxiliary inequality a verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundLemma {
    /// sum_{k=a+1..b} f(k) <= int_a^b f for decreasing f.
    IntegralComparison,
    /// Sandwich on psi1.
    DecayProduct,
    /// 0 < psi2 <= upper.
    GrowthProduct,
    /// Limit sandwich on sum_s psi1(t, s) / s^(2 alpha), alpha > 1.
    WeightedDecaySum,
    /// Limit window on sum_s (-1)^s psi1(t, s) / s^n, alpha > 1.
    AlternatingDecaySum,
}

impl BoundLemma {
    pub const ALL: [BoundLemma; 5] = [
        BoundLemma::IntegralComparison,
        BoundLemma::DecayProduct,
        BoundLemma::GrowthProduct,
        BoundLemma::WeightedDecaySum,
        BoundLemma::AlternatingDecaySum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundLemma::IntegralComparison => "integral_comparison",
            BoundLemma::DecayProduct => "decay_product",
            BoundLemma::GrowthProduct => "growth_product",
            BoundLemma::WeightedDecaySum => "weighted_decay_sum",
            BoundLemma::AlternatingDecaySum => "alternating_decay_sum",
        }
    }
}

impl fmt::Display for BoundLemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of one audited sample; unused fields are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundParams {
    pub t: u64,
    pub s: Option<u64>,
    pub alpha: f64,
    pub mu_eta: Option<f64>,
    pub beta: Option<f64>,
    pub n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundVerdict {
    pub lemma: BoundLemma,
    pub params: BoundParams,
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// `lower_holds && upper_holds`.
    pub holds: bool,
    /// Corrected (lower, upper) interval where the stated one can fail.
    pub corrected: Option<(f64, f64)>,
    pub corrected_holds: Option<bool>,
}

impl BoundVerdict {
    fn new(lemma: BoundLemma, params: BoundParams, exact: f64, lower: f64, upper: f64) -> Self {
        let lower_holds = lower <= exact + BOUND_SLACK;
        let upper_holds = exact <= upper + BOUND_SLACK;
        Self {
            lemma,
            params,
            exact,
            lower,
            upper,
            lower_holds,
            upper_holds,
            holds: lower_holds && upper_holds,
            corrected: None,
            corrected_holds: None,
        }
    }

    fn with_corrected(mut self, lower: f64, upper: f64) -> Self {
        self.corrected = Some((lower, upper));
        self.corrected_holds =
            Some(lower <= self.exact + BOUND_SLACK && self.exact <= upper + BOUND_SLACK);
        self
    }

    pub fn regime(&self) -> DecayRegime {
        DecayRegime::of(self.params.alpha)
    }
}

/// Checks the integral comparison for f(x) = x^-alpha on [a, b].
pub fn integral_comparison(a: u64, b: u64, alpha: f64) -> Result<BoundVerdict> {
    check_range(b, a)?;
    check_alpha(alpha)?;
    let sum: CompensatedSum = (a + 1..=b).map(|k| (k as f64).powf(-alpha)).collect();
    let integral = power_integral(a as f64, b as f64, alpha);
    let params = BoundParams {
        t: b,
        s: Some(a),
        alpha,
        ..Default::default()
    };
    Ok(BoundVerdict::new(
        BoundLemma::IntegralComparison,
        params,
        sum.value(),
        f64::NEG_INFINITY,
        integral,
    ))
}

/// Stated sandwich on psi1 plus the corrected upper bound.
pub fn decay_product_verdict(t: u64, s: u64, alpha: f64, mu_eta: f64) -> Result<BoundVerdict> {
    let b = psi1_bounds(t, s, alpha, mu_eta)?;
    let exact = psi1_exact(t, s, alpha, mu_eta)?;
    let params = BoundParams {
        t,
        s: Some(s),
        alpha,
        mu_eta: Some(mu_eta),
        ..Default::default()
    };
    Ok(
        BoundVerdict::new(BoundLemma::DecayProduct, params, exact, b.lower, b.upper)
            .with_corrected(b.lower, b.corrected_upper),
    )
}

/// Relative slack for comparisons carried out on logarithms.
const LOG_SLACK: f64 = 1e-12;

/// 0 < psi2 <= upper, compared in log space so deep underflow stays informative.
pub fn growth_product_verdict(
    t: u64,
    s: u64,
    alpha: f64,
    mu_eta: f64,
    beta: f64,
) -> Result<BoundVerdict> {
    let ln_exact = psi2_ln(t, s, alpha, mu_eta, beta)?;
    let ln_upper = psi2_ln_upper(t, s, alpha, mu_eta, beta)?;
    let params = BoundParams {
        t,
        s: Some(s),
        alpha,
        mu_eta: Some(mu_eta),
        beta: Some(beta),
        n: None,
    };
    let lower_holds = ln_exact.is_finite();
    let upper_holds = ln_exact <= ln_upper + LOG_SLACK * (1.0 + ln_upper.abs());
    Ok(BoundVerdict {
        lemma: BoundLemma::GrowthProduct,
        params,
        exact: ln_exact.exp(),
        lower: 0.0,
        upper: ln_upper.exp(),
        lower_holds,
        upper_holds,
        holds: lower_holds && upper_holds,
        corrected: None,
        corrected_holds: None,
    })
}

/// sum_{s=2..t} psi1(t, s) / s^(2 alpha), via the forward recurrence
/// S(t) = (1 - mu_eta/t^alpha) S(t-1) + t^(-2 alpha).
pub fn weighted_decay_sum(t: u64, alpha: f64, mu_eta: f64) -> Result<f64> {
    check_psi1_hypothesis(alpha, mu_eta)?;
    let mut acc = 0.0;
    for k in 2..=t {
        let kf = k as f64;
        acc = (1.0 - mu_eta / kf.powf(alpha)) * acc + kf.powf(-2.0 * alpha);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSumReport {
    pub value: f64,
    pub verdict: BoundVerdict,
}

/// Value at `t` together with the stated limit sandwich
/// `[exp(-c zeta(alpha)) / (2 alpha - 1), zeta(2 alpha)]` and a corrected lower
/// bound `exp(-c zeta(alpha)) (2^(1-2alpha) - (t+1)^(1-2alpha)) / (2 alpha - 1)`
/// that keeps the lower integration limit at 2.
pub fn sum_s1(t: u64, alpha: f64, mu_eta: f64) -> Result<WeightedSumReport> {
    if DecayRegime::of(alpha) != DecayRegime::Fast {
        return Err(Error::HypothesisViolated(format!(
            "weighted decay sum bound needs alpha > 1, got {alpha}"
        )));
    }
    if t < 2 {
        return Err(Error::InvalidRange("weighted decay sum needs t >= 2".into()));
    }
    let value = weighted_decay_sum(t, alpha, mu_eta)?;
    let damping = (-lower_rate(alpha, mu_eta) * riemann_zeta(alpha)?).exp();
    let spread = 2.0 * alpha - 1.0;
    let lower = damping / spread;
    let upper = riemann_zeta(2.0 * alpha)?;
    let corrected_lower =
        damping * (2f64.powf(-spread) - (t as f64 + 1.0).powf(-spread)) / spread;
    let params = BoundParams {
        t,
        alpha,
        mu_eta: Some(mu_eta),
        ..Default::default()
    };
    let verdict = BoundVerdict::new(BoundLemma::WeightedDecaySum, params, value, lower, upper)
        .with_corrected(corrected_lower, upper);
    Ok(WeightedSumReport { value, verdict })
}

#[inline]
fn alternating_sign(s: u64) -> f64 {
    if s.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// sum_{s=2..t} (-1)^s psi2(t, s) / s^n, accumulated backward from s = t with
/// compensated summation.
pub fn alt_sum_psi2(t: u64, alpha: f64, n: f64, mu_eta: f64, beta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must be in [0, 1), got {beta}")));
    }
    let mut weight = 1.0;
    let mut acc = CompensatedSum::new();
    for s in (2..=t).rev() {
        let sf = s as f64;
        acc.add(weight * alternating_sign(s) * sf.powf(-n));
        weight *= beta * (1.0 + mu_eta / sf.powf(alpha));
        if weight == 0.0 {
            break;
        }
    }
    Ok(acc.value())
}

/// sum_{s=2..t} (-1)^s psi1(t, s) / s^n, accumulated backward from s = t with
/// compensated summation.
pub fn alt_sum_psi1(t: u64, alpha: f64, n: f64, mu_eta: f64) -> Result<f64> {
    check_psi1_hypothesis(alpha, mu_eta)?;
    let mut weight = 1.0;
    let mut acc = CompensatedSum::new();
    for s in (2..=t).rev() {
        let sf = s as f64;
        acc.add(weight * alternating_sign(s) * sf.powf(-n));
        weight *= 1.0 - mu_eta / sf.powf(alpha);
        if weight == 0.0 {
            break;
        }
    }
    Ok(acc.value())
}

/// Values of a first-order recurrence S(t) = a(t) S(t-1) + (-1)^t / t^n at the
/// requested (sorted) rounds.
fn alternating_series_at(ts: &[u64], n: f64, decay: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    let mut next = ts.iter().copied().peekable();
    let last = ts.last().copied().unwrap_or(0);
    for k in 2..=last {
        let kf = k as f64;
        acc = decay(kf) * acc + alternating_sign(k) * kf.powf(-n);
        while next.peek() == Some(&k) {
            out.push(acc);
            next.next();
        }
    }
    out
}

/// Log-spaced rounds between `from` and `to` (both included), `per_decade`
/// points per factor of ten.
pub fn log_spaced_rounds(from: u64, to: u64, per_decade: u32) -> Vec<u64> {
    let (lo, hi) = ((from as f64).log10(), (to as f64).log10());
    let steps = ((hi - lo) * f64::from(per_decade)).round().max(1.0) as u64;
    let mut ts: Vec<u64> = (0..=steps)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64).round() as u64)
        .collect();
    ts.dedup();
    ts
}

/// |sum| t^n sampled over a range, with a boundedness verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoteAudit {
    pub ts: Vec<u64>,
    pub scaled: Vec<f64>,
    /// max/min of the scaled values over the last decade.
    pub last_decade_ratio: f64,
    /// Scaled values stay within a factor 3 over the last decade and are nonzero.
    pub bounded: bool,
}

fn envelope(values: &[f64], partner: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(partner)
        .map(|(a, b)| a.abs().max(b.abs()))
        .collect()
}

fn scaled_audit(ts: Vec<u64>, env: &[f64], n: f64) -> AsymptoteAudit {
    let scaled: Vec<f64> = ts.iter().zip(env).map(|(&t, v)| v * (t as f64).powf(n)).collect();
    let last = *ts.last().unwrap_or(&1) as f64;
    let tail: Vec<f64> = ts
        .iter()
        .zip(&scaled)
        .filter(|(&t, _)| t as f64 >= last / 10.0)
        .map(|(_, &v)| v)
        .collect();
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    AsymptoteAudit {
        ts,
        scaled,
        last_decade_ratio: ratio,
        bounded: min > 0.0 && ratio.is_finite() && ratio <= 3.0,
    }
}

/// Evaluates a series at each round and its successor and returns the envelope.
fn series_envelope(ts: &[u64], n: f64, decay: impl Fn(f64) -> f64 + Copy) -> Vec<f64> {
    let mut all: Vec<u64> = ts.iter().flat_map(|&t| [t, t + 1]).collect();
    all.sort_unstable();
    all.dedup();
    let values = alternating_series_at(&all, n, decay);
    let at = |t: u64| values[all.binary_search(&t).expect("round was requested")];
    let here: Vec<f64> = ts.iter().map(|&t| at(t)).collect();
    let next: Vec<f64> = ts.iter().map(|&t| at(t + 1)).collect();
    envelope(&here, &next)
}

/// Checks that |sum_s (-1)^s psi2(t,s)/s^n| t^n stays bounded and nonvanishing
/// over `t` in `[from, to]`.
pub fn alt_sum_psi2_asymptote(
    alpha: f64,
    n: f64,
    mu_eta: f64,
    beta: f64,
    from: u64,
    to: u64,
) -> Result<AsymptoteAudit> {
    check_alpha(alpha)?;
    if from < 2 || to <= from {
        return Err(Error::InvalidRange("need 2 <= from < to".into()));
    }
    let ts = log_spaced_rounds(from, to, 10);
    let env = series_envelope(&ts, n, |k| beta * (1.0 + mu_eta / k.powf(alpha)));
    Ok(scaled_audit(ts, &env, n))
}

/// Outcome of the regime-specific audit of the alternating psi1 sum.
#[derive(Debug, Clone, PartialEq)]
pub enum AltSumAudit {
    /// alpha < 1: |sum| t^n bounded.
    Slow(AsymptoteAudit),
    /// alpha = 1: fitted decay exponent of |sum| against min(n, mu_eta).
    Critical {
        fitted_exponent: f64,
        expected_exponent: f64,
        r_squared: f64,
    },
    /// alpha > 1: value at `t` against the limit window.
    Fast(BoundVerdict),
    /// alpha > 1 but gamma_1 <= 0, so the window is not asserted.
    HypothesisNotMet { gamma1: f64 },
}

/// gamma_1 = 2^-n - 3^-n 3^alpha / (3^alpha - mu_eta).
pub fn alternating_gamma1(alpha: f64, n: f64, mu_eta: f64) -> f64 {
    let three = 3f64.powf(alpha);
    0.5f64.powf(n) - (1.0 / 3.0f64).powf(n) * three / (three - mu_eta)
}

/// Window check for alpha > 1 at round `t`. The corrected upper bound uses
/// exp(-mu_eta / 3^alpha), the first factor actually present in psi1(t, 2).
pub fn alternating_window_verdict(t: u64, alpha: f64, n: f64, mu_eta: f64) -> Result<AltSumAudit> {
    if DecayRegime::of(alpha) != DecayRegime::Fast {
        return Err(Error::HypothesisViolated(format!(
            "window check needs alpha > 1, got {alpha}"
        )));
    }
    check_psi1_hypothesis(alpha, mu_eta)?;
    let gamma1 = alternating_gamma1(alpha, n, mu_eta);
    if !(gamma1 > 0.0) {
        return Ok(AltSumAudit::HypothesisNotMet { gamma1 });
    }
    let exact = alt_sum_psi1(t, alpha, n, mu_eta)?;
    let lower = gamma1 * (-lower_rate(alpha, mu_eta) * hurwitz_zeta(alpha, 3)?).exp();
    let scale = 0.5f64.powf(n);
    let upper = scale * (-mu_eta / 2f64.powf(alpha)).exp();
    let corrected_upper = scale * (-mu_eta / 3f64.powf(alpha)).exp();
    let params = BoundParams {
        t,
        alpha,
        mu_eta: Some(mu_eta),
        n: Some(n),
        ..Default::default()
    };
    Ok(AltSumAudit::Fast(
        BoundVerdict::new(BoundLemma::AlternatingDecaySum, params, exact, lower, upper)
            .with_corrected(lower, corrected_upper),
    ))
}

/// Regime-dependent audit of sum_s (-1)^s psi1(t,s)/s^n over `t` in
/// `[from, to]`; the fast regime is checked at `to`.
pub fn alt_sum_psi1_audit(
    alpha: f64,
    n: f64,
    mu_eta: f64,
    from: u64,
    to: u64,
) -> Result<AltSumAudit> {
    check_psi1_hypothesis(alpha, mu_eta)?;
    if !(n > 0.0) {
        return Err(Error::invalid("n must be > 0"));
    }
    if from < 2 || to <= from {
        return Err(Error::InvalidRange("need 2 <= from < to".into()));
    }
    let decay = |k: f64| 1.0 - mu_eta / k.powf(alpha);
    match DecayRegime::of(alpha) {
        DecayRegime::Slow => {
            let ts = log_spaced_rounds(from, to, 10);
            let env = series_envelope(&ts, n, decay);
            Ok(AltSumAudit::Slow(scaled_audit(ts, &env, n)))
        }
        DecayRegime::Critical => {
            let ts = log_spaced_rounds(from, to, 10);
            let env = series_envelope(&ts, n, decay);
            let tf: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
            let fit = log_log_fit(&tf, &env).ok_or(Error::InsufficientData {
                got: env.iter().filter(|v| **v > 0.0).count(),
                need: 2,
            })?;
            Ok(AltSumAudit::Critical {
                fitted_exponent: -fit.slope,
                expected_exponent: n.min(mu_eta),
                r_squared: fit.r_squared,
            })
        }
        DecayRegime::Fast => alternating_window_verdict(to, alpha, n, mu_eta),
    }
}

/// Asymptotic class of the optimality gap under a step schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateRegime {
    Constant,
    PolySlow,
    PolyCritical,
    PolyFast,
    /// Geometric decay of the step; behaves like the fast polynomial class.
    Exponential,
}

impl fmt::Display for RateRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateRegime::Constant => "const",
            RateRegime::PolySlow => "poly_slow",
            RateRegime::PolyCritical => "poly_critical",
            RateRegime::PolyFast => "poly_fast",
            RateRegime::Exponential => "exp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePrediction {
    pub regime: RateRegime,
    /// Decay exponent of the |theta| envelope; `None` when it plateaus.
    pub envelope_exponent: Option<f64>,
    pub plateau: bool,
    /// Order of f(theta_t) - f(theta*), as text.
    pub gap_order: String,
}

/// Predicted asymptotic behaviour on the two-client construction with one
/// local step. For constant steps the exponent is in the horizon T, with the
/// step tuned as eta ~ 1/(mu T).
pub fn predict_rate(config: &AlgoConfig, mu: f64, g: f64) -> RatePrediction {
    let eta = config.schedule.base() * config.eta_local;
    let mu_eta = mu * eta;
    let (regime, exponent) = match config.schedule {
        StepSchedule::Constant { .. } => (RateRegime::Constant, Some(1.0)),
        StepSchedule::Polynomial { alpha, .. } => match DecayRegime::of(alpha) {
            DecayRegime::Slow => (RateRegime::PolySlow, Some(alpha)),
            DecayRegime::Critical => (RateRegime::PolyCritical, Some(mu_eta.min(1.0))),
            DecayRegime::Fast => (RateRegime::PolyFast, None),
        },
        StepSchedule::Exponential { .. } => (RateRegime::Exponential, None),
    };
    let g2 = g * g;
    let gap_order = match exponent {
        Some(e) if regime == RateRegime::Constant => {
            format!("Theta(G^2/(mu T^2)) = Theta({:e} / T^{})", g2 / mu, 2.0 * e)
        }
        Some(e) => format!("Theta(G^2/(mu t^{})) = Theta({:e} / t^{})", 2.0 * e, g2 / mu, 2.0 * e),
        None => format!("Theta(G^2/mu) = Theta({:e}) plateau", g2 / mu),
    };
    RatePrediction {
        regime,
        envelope_exponent: exponent,
        plateau: exponent.is_none(),
        gap_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Algorithm;
    use std::f64::consts::PI;

    #[test]
    fn psi1_known_values() {
        let exact = psi1_exact(10, 2, 1.0, 0.5).unwrap();
        let direct: f64 = (3..=10).map(|k| 1.0 - 0.5 / k as f64).product();
        assert!((exact - direct).abs() < 1e-15);
        assert!((exact - 0.46986).abs() < 1e-5);
        assert_eq!(psi1_exact(8, 7, 1.5, 0.3).unwrap(), 1.0 - 0.3 / 8f64.powf(1.5));
        assert!(matches!(psi1_exact(5, 5, 1.0, 0.1), Err(Error::InvalidRange(_))));
        assert_eq!(psi2_exact(9, 3, 1.0, 0.4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn psi1_stated_and_corrected_bounds() {
        let b = psi1_bounds(10, 2, 1.0, 0.5).unwrap();
        let exact = psi1_exact(10, 2, 1.0, 0.5).unwrap();
        assert!((b.upper - 0.2f64.sqrt()).abs() < 1e-12);
        assert!(exact > b.upper);
        assert!((b.corrected_upper - (3.0f64 / 11.0).sqrt()).abs() < 1e-12);
        assert!(exact <= b.corrected_upper);
        assert!((b.lower - 0.2f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(b.lower <= exact);

        let tiny = psi1_bounds(50, 3, 0.7, 1e-12).unwrap();
        for v in [tiny.lower, tiny.upper, tiny.corrected_upper] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(matches!(
            psi1_bounds(10, 2, 1.0, 2.0),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn psi2_cases() {
        let exact = psi2_exact(6, 2, 1.0, 0.5, 0.5).unwrap();
        let direct: f64 = (3..=6).map(|k| 0.5 + 0.25 / k as f64).product();
        assert!((exact - direct).abs() < 1e-15);
        let upper = psi2_upper(6, 2, 1.0, 0.5, 0.5).unwrap();
        assert!((upper - 0.5f64.powi(4) * 3f64.sqrt()).abs() < 1e-14);
        assert!(exact <= upper);
        let flat = psi2_exact(20, 4, 0.5, 0.0, 0.7).unwrap();
        assert!((flat - 0.7f64.powi(16)).abs() <= 4.0 * f64::EPSILON * flat);
    }

    #[test]
    fn log_fallback_keeps_deep_products() {
        let v = psi2_exact(2000, 1, 1.0, 0.1, 0.5).unwrap();
        let ln = psi2_ln(2000, 1, 1.0, 0.1, 0.5).unwrap();
        assert!(v == 0.0 || ((v.ln() - ln) / ln).abs() < 1e-12);
        let v = psi2_exact(900, 1, 2.0, 0.1, 0.5).unwrap();
        let ln = psi2_ln(900, 1, 2.0, 0.1, 0.5).unwrap();
        assert!(v > 0.0);
        assert!(((v.ln() - ln) / ln).abs() < 1e-12);
    }

    #[test]
    fn zeta_values() {
        assert!((hurwitz_zeta(2.0, 1).unwrap() - PI * PI / 6.0).abs() < 1e-10);
        assert!((hurwitz_zeta(2.0, 2).unwrap() - (PI * PI / 6.0 - 1.0)).abs() < 1e-10);
        assert!((riemann_zeta(3.0).unwrap() - 1.202_056_903_159_594).abs() < 1e-10);
        assert!((riemann_zeta(4.0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-10);
        assert_eq!(hurwitz_zeta(1.0, 1), Err(Error::DivergentSeries(1.0)));
        assert!(hurwitz_zeta(0.5, 3).is_err());
    }

    #[test]
    fn integral_comparison_examples() {
        let v = integral_comparison(2, 10, 1.0).unwrap();
        assert!((v.exact - 1.428_968_253_968_254).abs() < 1e-12);
        assert!((v.upper - 5f64.ln()).abs() < 1e-12);
        assert!(v.holds);
        assert!(integral_comparison(9, 10, 0.3).unwrap().holds);
    }

    #[test]
    fn weighted_sum_report() {
        let r = sum_s1(10_000, 2.0, 0.5).unwrap();
        assert!(r.value <= PI.powi(4) / 90.0);
        assert_eq!(r.verdict.corrected_holds, Some(true));
        let plain: f64 = (2..=500).map(|s| (s as f64).powi(-4)).sum();
        assert!((weighted_decay_sum(500, 2.0, 0.0).unwrap() - plain).abs() < 1e-15);
        assert!(sum_s1(100, 1.0, 0.5).is_err());
    }

    #[test]
    fn alternating_sums() {
        for t in [2u64, 7, 10] {
            let v = alt_sum_psi2(t, 1.0, 1.5, 0.3, 0.0).unwrap();
            assert_eq!(v, alternating_sign(t) * (t as f64).powf(-1.5));
        }
        let forward = alternating_series_at(&[777], 1.0, |k| 1.0 - 0.5 / k.powf(0.8));
        let backward = alt_sum_psi1(777, 0.8, 1.0, 0.5).unwrap();
        assert!((forward[0] - backward).abs() < 1e-13);

        let audit = alt_sum_psi2_asymptote(1.0, 1.0, 0.3, 0.5, 1_000, 100_000).unwrap();
        assert!(audit.bounded, "{audit:?}");

        let ratio = alt_sum_psi2(5000, 1.0, 2.0, 0.3, 0.5).unwrap()
            / alt_sum_psi2(5000, 1.0, 1.0, 0.3, 0.5).unwrap();
        assert!((ratio * 5000.0 - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn alternating_psi1_regimes() {
        match alt_sum_psi1_audit(0.5, 1.0, 0.5, 1_000, 100_000).unwrap() {
            AltSumAudit::Slow(a) => assert!(a.bounded, "{a:?}"),
            other => panic!("{other:?}"),
        }
        match alt_sum_psi1_audit(1.0, 2.0, 0.5, 1_000, 100_000).unwrap() {
            AltSumAudit::Critical {
                fitted_exponent,
                expected_exponent,
                ..
            } => {
                assert_eq!(expected_exponent, 0.5);
                assert!((fitted_exponent - 0.5).abs() < 0.05, "{fitted_exponent}");
            }
            other => panic!("{other:?}"),
        }
        match alt_sum_psi1_audit(2.0, 1.0, 0.5, 1_000, 10_000).unwrap() {
            AltSumAudit::Fast(v) => {
                assert!(v.holds, "{v:?}");
                assert!((v.upper - 0.5 * (-0.125f64).exp()).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            alternating_window_verdict(10_000, 1.5, 0.05, 2.5).unwrap(),
            AltSumAudit::HypothesisNotMet { .. }
        ));
    }

    #[test]
    fn rate_predictions() {
        let cfg = |schedule| AlgoConfig::new(Algorithm::FedAvgM, 0.9, 1, 1.0, schedule).unwrap();
        let p = predict_rate(&cfg(StepSchedule::Polynomial { eta: 1.0, alpha: 0.5 }), 1.0, 10.0);
        assert_eq!((p.regime, p.envelope_exponent), (RateRegime::PolySlow, Some(0.5)));
        let p = predict_rate(&cfg(StepSchedule::Polynomial { eta: 0.5, alpha: 1.0 }), 1.0, 10.0);
        assert_eq!((p.regime, p.envelope_exponent), (RateRegime::PolyCritical, Some(0.5)));
        let p = predict_rate(&cfg(StepSchedule::Polynomial { eta: 3.0, alpha: 1.0 }), 1.0, 10.0);
        assert_eq!(p.envelope_exponent, Some(1.0));
        let p = predict_rate(&cfg(StepSchedule::Polynomial { eta: 0.5, alpha: 2.0 }), 1.0, 10.0);
        assert!(p.plateau && p.regime == RateRegime::PolyFast);
        let p = predict_rate(&cfg(StepSchedule::Constant { eta: 0.01 }), 1.0, 10.0);
        assert!(p.gap_order.contains("T^2"));
    }
}
