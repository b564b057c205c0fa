//! Inverse-temperature schedules shared by the MCMC and game solvers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Inverse temperature as a function of the 1-based iteration index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `value` at every iteration.
    Constant { value: f64 },
    /// `scale * ln(1 + i)`.
    Log { scale: f64 },
    /// `slope * i`.
    Linear { slope: f64 },
}

impl Schedule {
    pub fn log(scale: f64) -> Self {
        Schedule::Log { scale }
    }

    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn at(&self, i: usize) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Log { scale } => scale * (1.0 + i as f64).ln(),
            Schedule::Linear { slope } => slope * i as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Schedule::Constant { value } => value,
            Schedule::Log { scale } => scale,
            Schedule::Linear { slope } => slope,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule coefficient must be finite and non-negative, got {v}"
            )));
        }
        Ok(())
    }
}

/// `exp(scale * v) / Σ exp(scale * v')`, shifted by the maximum so large
/// scales cannot overflow.
pub fn softmax(values: &[f64], scale: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| (scale * (v - max)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Index drawn from `probs` by inverse CDF at `u ∈ [0, 1)`.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` past the total: take the last positive entry.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_schedule_grows() {
        let s = Schedule::log(2.0);
        assert!((s.at(1) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(s.at(100) > s.at(10));
        assert_eq!(Schedule::constant(0.5).at(77), 0.5);
        assert_eq!(Schedule::Linear { slope: 0.5 }.at(30), 15.0);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, 0.0], 10.0);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] == 0.0);
        assert_eq!(softmax(&[1.0, 2.0, 3.0], 0.0), vec![1.0 / 3.0; 3]);
        assert_eq!(sample_index(&[0.25, 0.0, 0.75], 0.3), 2);
        assert_eq!(sample_index(&[0.25, 0.75, 0.0], 1.0 - 1e-17), 1);
    }

    #[test]
    fn rejects_negative() {
        assert!(Schedule::log(-1.0).validate().is_err());
        assert!(Schedule::constant(f64::NAN).validate().is_err());
    }
}
