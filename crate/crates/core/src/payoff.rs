//! Knock-out max-call rewards.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::process::TrajectorySet;

/// Rewards on the exercise grid, indexed `[path][period]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSet {
    /// 1 while the option has not been knocked out.
    pub knockout_alive: Vec<u8>,
    /// Undiscounted payoff g′.
    pub payoff_undiscounted: Vec<f64>,
    /// Discounted reward g = β^t g′ with t = 1..T.
    pub reward: Vec<f64>,
    pub discount_beta: f64,
    /// Realized maximum of `reward`, used as Ḡ.
    pub reward_upper_bound: f64,
    pub n_paths: usize,
    pub n_periods: usize,
}

impl RewardSet {
    #[inline]
    pub fn reward(&self, path: usize, period: usize) -> f64 {
        self.reward[path * self.n_periods + period]
    }

    #[inline]
    pub fn payoff(&self, path: usize, period: usize) -> f64 {
        self.payoff_undiscounted[path * self.n_periods + period]
    }

    #[inline]
    pub fn alive(&self, path: usize, period: usize) -> bool {
        self.knockout_alive[path * self.n_periods + period] == 1
    }

    /// Rewards of a single period across all paths.
    pub fn stage_rewards(&self, period: usize) -> Vec<f64> {
        (0..self.n_paths).map(|w| self.reward(w, period)).collect()
    }

    /// Builds a reward set directly from discounted rewards, for synthetic
    /// problems that do not come from a price process. Undiscounted payoffs
    /// are recovered as `reward / β^t` and every path is treated as alive.
    pub fn from_rewards(reward: Vec<f64>, n_paths: usize, n_periods: usize, beta: f64) -> Result<Self> {
        if reward.len() != n_paths * n_periods {
            return Err(Error::Shape(format!(
                "expected {} rewards, got {}",
                n_paths * n_periods,
                reward.len()
            )));
        }
        if reward.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidArgument("rewards must be finite and nonnegative".into()));
        }
        let payoff_undiscounted = reward
            .iter()
            .enumerate()
            .map(|(i, g)| g / beta.powi((i % n_periods) as i32 + 1))
            .collect();
        let reward_upper_bound = reward.iter().cloned().fold(0.0, f64::max);
        Ok(RewardSet {
            knockout_alive: vec![1; n_paths * n_periods],
            payoff_undiscounted,
            reward,
            discount_beta: beta,
            reward_upper_bound,
            n_paths,
            n_periods,
        })
    }
}

/// `y(ω,t) = 1` iff every asset price on dates `1..=t` stayed strictly
/// below the barrier.
pub fn knockout_indicators(trajectories: &TrajectorySet, barrier: f64) -> Result<Vec<u8>> {
    if !(barrier > 0.0) {
        return Err(Error::InvalidArgument(format!("barrier must be > 0, got {barrier}")));
    }
    let t_len = trajectories.n_periods;
    let mut alive = vec![0u8; trajectories.n_paths * t_len];
    alive.par_chunks_mut(t_len).enumerate().for_each(|(w, row)| {
        let mut running_max = f64::NEG_INFINITY;
        for (t, y) in row.iter_mut().enumerate() {
            for &p in trajectories.prices_at(w, t) {
                running_max = running_max.max(p);
            }
            *y = u8::from(running_max < barrier);
        }
    });
    Ok(alive)
}

/// Knock-out max-call payoffs and their discounted rewards.
pub fn maxcall_rewards(
    trajectories: &TrajectorySet,
    strike: f64,
    barrier: f64,
    beta: f64,
) -> Result<RewardSet> {
    if !(strike > 0.0) {
        return Err(Error::InvalidArgument(format!("strike must be > 0, got {strike}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1], got {beta}")));
    }
    let alive = knockout_indicators(trajectories, barrier)?;
    let t_len = trajectories.n_periods;
    let n_paths = trajectories.n_paths;
    let discounts: Vec<f64> = (1..=t_len).map(|t| beta.powi(t as i32)).collect();

    let mut payoff = vec![0.0; n_paths * t_len];
    payoff.par_chunks_mut(t_len).enumerate().for_each(|(w, row)| {
        for (t, g) in row.iter_mut().enumerate() {
            if alive[w * t_len + t] == 1 {
                let top = trajectories
                    .prices_at(w, t)
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                *g = (top - strike).max(0.0);
            }
        }
    });
    let reward: Vec<f64> = payoff
        .iter()
        .enumerate()
        .map(|(i, g)| discounts[i % t_len] * g)
        .collect();
    let reward_upper_bound = reward.iter().cloned().fold(0.0, f64::max);

    Ok(RewardSet {
        knockout_alive: alive,
        payoff_undiscounted: payoff,
        reward,
        discount_beta: beta,
        reward_upper_bound,
        n_paths,
        n_periods: t_len,
    })
}
