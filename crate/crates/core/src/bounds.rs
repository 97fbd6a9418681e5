//! Closed-form Rademacher-complexity bounds for norm-bounded linear
//! randomized policies, and the generalization lower bounds they imply.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormType {
    L1,
    L2,
    #[serde(rename = "LINF")]
    LInf,
}

impl NormType {
    pub const ALL: [NormType; 3] = [NormType::L1, NormType::L2, NormType::LInf];
}

impl fmt::Display for NormType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormType::L1 => "L1",
            NormType::L2 => "L2",
            NormType::LInf => "LINF",
        })
    }
}

impl FromStr for NormType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(NormType::L1),
            "L2" => Ok(NormType::L2),
            "LINF" | "L_INF" | "INF" => Ok(NormType::LInf),
            _ => Err(Error::InvalidArgument(format!("unknown norm type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub norm_type: NormType,
    /// Radius of the weight ball.
    pub radius_b: f64,
    /// Bound on the feature norm dual to `norm_type`.
    pub feature_bound_q: f64,
    /// Bound on discounted rewards.
    pub reward_bound_g: f64,
    pub k: usize,
    pub t: usize,
    pub n_paths: usize,
    pub delta: f64,
}

impl BoundInputs {
    /// `delta = 1` is accepted as the degenerate case with no confidence
    /// penalty.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(nonneg(self.radius_b) && nonneg(self.feature_bound_q) && nonneg(self.reward_bound_g)) {
            return Err(Error::InvalidArgument("B, Q and G must be finite and nonnegative".into()));
        }
        if self.k == 0 || self.t == 0 || self.n_paths == 0 {
            return Err(Error::InvalidArgument("K, T and the number of paths must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        Ok(())
    }
}

/// Upper bound on the empirical Rademacher complexity of the reward class.
pub fn rademacher_bound(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let kt = (inp.k * inp.t) as f64;
    let dimension_factor = match inp.norm_type {
        NormType::L1 => (2.0 * (2.0 * kt).ln()).sqrt(),
        NormType::L2 => kt.sqrt(),
        NormType::LInf => kt,
    };
    Ok(std::f64::consts::SQRT_2 * (inp.reward_bound_g + 1.0) * inp.radius_b * inp.feature_bound_q * dimension_factor
        / (inp.n_paths as f64).sqrt())
}

/// High-probability lower bound on the true reward of every policy in the
/// class given its sample reward `j_hat`. The empirical form pays a larger
/// confidence term in exchange for using the empirical complexity.
pub fn generalization_lower_bound(j_hat: f64, inp: &BoundInputs, empirical: bool) -> Result<f64> {
    let r = rademacher_bound(inp)?;
    let n = inp.n_paths as f64;
    let penalty = if empirical {
        3.0 * inp.reward_bound_g * ((2.0 / inp.delta).ln() / (2.0 * n)).sqrt()
    } else {
        inp.reward_bound_g * ((1.0 / inp.delta).ln() / (2.0 * n)).sqrt()
    };
    Ok(j_hat - 2.0 * r - penalty)
}
