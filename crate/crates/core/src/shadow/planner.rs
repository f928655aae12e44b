//! Sample-count planner for the shadow estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which exponent of 4 the planner uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleBound {
    /// 4^{2d+1}.
    #[default]
    Theorem,
    /// 4^{k1 + (2 k0 − 2) d − 1} for k0-local bricks and k1-local observables.
    Generalized { k0: u32, k1: u32 },
}

impl SampleBound {
    fn exponent(self, d: u32) -> i64 {
        match self {
            SampleBound::Theorem => 2 * d as i64 + 1,
            SampleBound::Generalized { k0, k1 } => k1 as i64 + (2 * k0 as i64 - 2) * d as i64 - 1,
        }
    }
}

/// A planned sample count together with the value before rounding up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub samples: u64,
    pub real: f64,
}

/// (M²/ε²)·ln(2MC/δ)·4^e·max_norm² before the ceiling.
pub fn sample_bound(m: u32, c: u32, d: u32, eps: f64, delta: f64, max_norm: f64, bound: SampleBound) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if m < 1 || c < 1 || d < 1 {
        return Err(Error::InvalidParameter("M, C and d must be at least 1".into()));
    }
    if !(max_norm.is_finite() && max_norm > 0.0) {
        return Err(Error::InvalidParameter(format!("max_norm must be positive, got {max_norm}")));
    }
    if let SampleBound::Generalized { k0, k1 } = bound {
        if k0 < 1 || k1 < 1 {
            return Err(Error::InvalidParameter("k0 and k1 must be at least 1".into()));
        }
    }
    let m = m as f64;
    let log = (2.0 * m * c as f64 / delta).ln();
    let pow = 4f64.powi(bound.exponent(d) as i32);
    Ok(m * m / (eps * eps) * log * pow * max_norm * max_norm)
}

pub fn plan_samples(m: u32, c: u32, d: u32, eps: f64, delta: f64, max_norm: f64, bound: SampleBound) -> Result<SamplePlan> {
    let real = sample_bound(m, c, d, eps, delta, max_norm, bound)?;
    if real >= u64::MAX as f64 {
        return Err(Error::InvalidParameter(format!("planned sample count {real:e} overflows")));
    }
    Ok(SamplePlan {
        samples: real.ceil() as u64,
        real,
    })
}
