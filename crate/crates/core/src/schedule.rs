//! Server step-size schedules eta_t.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// eta_t = eta
    Constant { eta: f64 },
    /// eta_t = eta / t^alpha
    Polynomial { eta: f64, alpha: f64 },
    /// eta_t = eta * gamma^t
    Exponential { eta: f64, gamma: f64 },
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        Self::Constant { eta }.validated()
    }

    pub fn polynomial(eta: f64, alpha: f64) -> Result<Self> {
        Self::Polynomial { eta, alpha }.validated()
    }

    pub fn exponential(eta: f64, gamma: f64) -> Result<Self> {
        Self::Exponential { eta, gamma }.validated()
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.base();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be > 0, got {eta}")));
        }
        match *self {
            StepSchedule::Constant { .. } => Ok(()),
            StepSchedule::Polynomial { alpha, .. } => {
                if alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("alpha must be > 0, got {alpha}")))
                }
            }
            StepSchedule::Exponential { gamma, .. } => {
                if gamma > 0.0 && gamma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gamma must be in (0, 1), got {gamma}")))
                }
            }
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    /// The base step eta.
    pub fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant { eta }
            | StepSchedule::Polynomial { eta, .. }
            | StepSchedule::Exponential { eta, .. } => eta,
        }
    }

    pub fn with_base(self, eta: f64) -> Self {
        match self {
            StepSchedule::Constant { .. } => StepSchedule::Constant { eta },
            StepSchedule::Polynomial { alpha, .. } => StepSchedule::Polynomial { eta, alpha },
            StepSchedule::Exponential { gamma, .. } => StepSchedule::Exponential { eta, gamma },
        }
    }

    /// Step at round `t`. Errors for `t < 1`.
    pub fn step_at(&self, t: u64) -> Result<f64> {
        if t < 1 {
            return Err(Error::invalid("round index must be >= 1"));
        }
        Ok(self.step(t))
    }

    /// Unchecked variant of [`step_at`](Self::step_at) for hot loops; `t >= 1`.
    #[inline]
    pub(crate) fn step(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::Polynomial { eta, alpha } => {
                if t == 1 {
                    eta
                } else {
                    eta / (alpha * (t as f64).ln()).exp()
                }
            }
            StepSchedule::Exponential { eta, gamma } => eta * gamma.powf(t as f64),
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StepSchedule::Constant { .. } => write!(f, "constant"),
            StepSchedule::Polynomial { alpha, .. } => write!(f, "poly:{alpha}"),
            StepSchedule::Exponential { gamma, .. } => write!(f, "exp:{gamma}"),
        }
    }
}
