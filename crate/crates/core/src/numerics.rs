//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator.
///
/// Tracks the low-order bits lost by each addition; unlike plain Kahan it stays
/// correct when an addend is larger in magnitude than the running sum, which is
/// the common case for alternating series.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sum of (1 - x)^j for j = 0..terms-1, by iterative accumulation.
///
/// Never uses the ratio formula, so it is exact in the x -> 0 limit.
pub fn geometric_sum(x: f64, terms: u32) -> f64 {
    let ratio = 1.0 - x;
    let mut power = 1.0;
    let mut acc = CompensatedSum::new();
    for _ in 0..terms {
        acc.add(power);
        power *= ratio;
    }
    acc.value()
}

/// Ordinary least-squares line through `(x, y)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // a perfectly flat response is fully explained by the constant model
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Log-log least-squares fit; non-positive samples are skipped.
pub fn log_log_fit(ts: &[f64], values: &[f64]) -> Option<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > 0.0 && v > 0.0 && v.is_finite())
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .unzip();
    least_squares(&xs, &ys)
}
