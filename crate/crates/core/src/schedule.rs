use crate::error::{Error, Result};

/// Power-law sequence `scale * n^(-exponent)`, used for both the step sizes
/// and the smoothing variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    scale: f64,
    exponent: f64,
}

impl Schedule {
    pub fn new(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(format!(
                "schedule scale must be > 0, got {scale}"
            )));
        }
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::domain(format!(
                "schedule exponent must lie in (0, 1], got {exponent}"
            )));
        }
        Ok(Schedule { scale, exponent })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Value at iteration `n` (1-based).
    pub fn value(&self, n: u64) -> f64 {
        assert!(n >= 1, "schedules are indexed from n = 1");
        self.scale * (n as f64).powf(-self.exponent)
    }
}

/// Free-function form of [`Schedule::value`].
pub fn schedule_value(s: &Schedule, n: u64) -> f64 {
    s.value(n)
}
