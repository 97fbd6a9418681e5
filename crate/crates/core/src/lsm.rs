//! Least-squares Monte Carlo: backward regression of realized continuation
//! values onto the basis, regressing over every trajectory.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::FeatureTensor;
use crate::error::{Error, Result};
use crate::payoff::RewardSet;
use crate::policy::{dot, StopTime, WeightMatrix};
use crate::reduce::{pairwise_sum, par_sum, par_sum_vec};

/// Relative ridge added to the Gram diagonal.
pub const RIDGE_RELATIVE: f64 = 1e-10;

/// Continuation-value regression weights for periods `1..T-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmWeights {
    pub weights: Vec<f64>,
    /// Horizon `T` of the problem (the matrix has `T - 1` rows).
    pub n_periods: usize,
    pub k: usize,
    pub basis_fingerprint: String,
}

impl LsmWeights {
    #[inline]
    pub fn row(&self, period: usize) -> &[f64] {
        &self.weights[period * self.k..(period + 1) * self.k]
    }

    /// The `T - 1` regression rows as a weight matrix (for CSV output and
    /// threshold extraction).
    pub fn as_matrix(&self) -> WeightMatrix {
        WeightMatrix {
            weights: self.weights.clone(),
            n_periods: self.n_periods - 1,
            k: self.k,
            basis_fingerprint: self.basis_fingerprint.clone(),
        }
    }

    pub fn from_matrix(m: &WeightMatrix) -> Self {
        LsmWeights {
            weights: m.weights.clone(),
            n_periods: m.n_periods + 1,
            k: m.k,
            basis_fingerprint: m.basis_fingerprint.clone(),
        }
    }
}

/// Least-squares objective of one stage at the fitted and at the zero fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsmStage {
    pub t: usize,
    pub objective: f64,
    pub objective_at_zero: f64,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub struct LsmFit {
    pub weights: LsmWeights,
    pub stages: Vec<LsmStage>,
}

impl LsmFit {
    /// Periods whose design matrix was numerically rank deficient.
    pub fn rank_deficient_periods(&self) -> Vec<usize> {
        self.stages.iter().filter(|s| s.rank_deficient).map(|s| s.t).collect()
    }
}

/// Solves `(G + λI) b = rhs` with `λ = RIDGE_RELATIVE · mean(diag G)`.
/// Returns the solution and whether `G` looked rank deficient.
fn ridge_solve(gram: DMatrix<f64>, rhs: DVector<f64>) -> (DVector<f64>, bool) {
    let k = gram.nrows();
    let mean_diag = gram.diagonal().mean();
    if !(mean_diag > 0.0) {
        return (DVector::zeros(k), true);
    }
    let singular = gram.clone().singular_values();
    let smax = singular.max();
    let rank_deficient = singular.min() <= smax * 1e-12;
    let lambda = RIDGE_RELATIVE * mean_diag;
    let regularized = &gram + DMatrix::identity(k, k) * lambda;
    let solution = match regularized.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => regularized
            .svd(true, true)
            .solve(&rhs, smax * 1e-14)
            .unwrap_or_else(|_| DVector::zeros(k)),
    };
    (solution, rank_deficient)
}

fn half_sse(stage: &[f64], k: usize, targets: &[f64], b: &[f64]) -> f64 {
    let n = targets.len();
    0.5 * par_sum(n, |w| {
        let r = targets[w] - dot(b, &stage[w * k..(w + 1) * k]);
        r * r
    })
}

/// Fits the backward least-squares recursion.
pub fn lsm_fit(features: &FeatureTensor, rewards: &RewardSet) -> Result<LsmFit> {
    let t_len = features.n_periods;
    let k = features.k;
    let n = features.n_paths;
    if t_len < 2 {
        return Err(Error::InvalidArgument("LSM needs at least two periods".into()));
    }
    if rewards.n_paths != n || rewards.n_periods != t_len {
        return Err(Error::Shape("features and rewards disagree in shape".into()));
    }

    let mut weights = vec![0.0; (t_len - 1) * k];
    let mut stages = Vec::with_capacity(t_len - 1);
    let mut continuation = rewards.stage_rewards(t_len - 1);

    for period in (0..t_len - 1).rev() {
        let stage = features.stage_matrix(period);
        let sums = par_sum_vec(n, k * k + k, |w, acc| {
            let phi = &stage[w * k..(w + 1) * k];
            let c = continuation[w];
            for i in 0..k {
                let pi = phi[i];
                if pi == 0.0 {
                    continue;
                }
                for j in i..k {
                    acc[i * k + j] += pi * phi[j];
                }
                acc[k * k + i] += pi * c;
            }
        });
        let gram = DMatrix::from_fn(k, k, |i, j| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            sums[lo * k + hi]
        });
        let rhs = DVector::from_column_slice(&sums[k * k..]);
        let (b, rank_deficient) = ridge_solve(gram, rhs);
        let b: Vec<f64> = b.iter().cloned().collect();

        stages.push(LsmStage {
            t: period + 1,
            objective: half_sse(&stage, k, &continuation, &b),
            objective_at_zero: 0.5 * pairwise_sum(&continuation.iter().map(|c| c * c).collect::<Vec<_>>()),
            rank_deficient,
        });

        continuation
            .par_iter_mut()
            .enumerate()
            .for_each(|(w, c)| {
                let g = rewards.reward(w, period);
                if dot(&b, &stage[w * k..(w + 1) * k]) < g {
                    *c = g;
                }
            });
        weights[period * k..(period + 1) * k].copy_from_slice(&b);
    }
    stages.reverse();

    Ok(LsmFit {
        weights: LsmWeights {
            weights,
            n_periods: t_len,
            k,
            basis_fingerprint: features.fingerprint.clone(),
        },
        stages,
    })
}

/// Stopping times of the greedy LSM policy: stop at `t < T` iff
/// `g(t) > b_t · Φ`, and at `T` iff `g(T) > 0`.
pub fn lsm_stopping_times(lsm: &LsmWeights, features: &FeatureTensor, rewards: &RewardSet) -> Result<Vec<StopTime>> {
    if lsm.n_periods != features.n_periods || lsm.k != features.k {
        return Err(Error::Shape("LSM weights do not match features".into()));
    }
    let t_len = features.n_periods;
    Ok((0..features.n_paths)
        .into_par_iter()
        .map(|w| {
            for period in 0..t_len - 1 {
                if rewards.reward(w, period) > dot(lsm.row(period), features.row(w, period)) {
                    return StopTime::At(period + 1);
                }
            }
            if rewards.reward(w, t_len - 1) > 0.0 {
                StopTime::At(t_len)
            } else {
                StopTime::Never
            }
        })
        .collect())
}

/// Sample-average reward of the greedy LSM policy.
pub fn eval_lsm(lsm: &LsmWeights, features: &FeatureTensor, rewards: &RewardSet) -> Result<f64> {
    let taus = lsm_stopping_times(lsm, features, rewards)?;
    let total = par_sum(taus.len(), |w| match taus[w] {
        StopTime::At(t) => rewards.reward(w, t - 1),
        StopTime::Never => 0.0,
    });
    Ok(total / taus.len() as f64)
}

/// Row used for the final period after the LSM-to-linear transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LastPeriodRule {
    /// Payoff weight 1, everything else 0: stop iff g′(T) > 0.
    #[default]
    StopIfInTheMoney,
    /// All-zero row: never stop at T.
    Zero,
}

/// Rewrites LSM's rule `g(t) > b_t · Φ` as a linear policy on the same
/// basis, using `g(t) = β^t g′(t)` with g′ a basis column.
pub fn lsm_to_linear_policy(
    lsm: &LsmWeights,
    beta: f64,
    payoff_column: Option<usize>,
    last_period_rule: LastPeriodRule,
) -> Result<WeightMatrix> {
    let payoff = payoff_column.ok_or(Error::MissingPayoffColumn)?;
    if payoff >= lsm.k {
        return Err(Error::MissingPayoffColumn);
    }
    let k = lsm.k;
    let t_len = lsm.n_periods;
    let mut out = WeightMatrix::zeros(t_len, k, lsm.basis_fingerprint.clone());
    for period in 0..t_len - 1 {
        let inv = beta.powi(-(period as i32 + 1));
        let src = lsm.row(period);
        let dst = out.row_mut(period);
        for j in 0..k {
            dst[j] = -inv * src[j];
        }
        dst[payoff] += 1.0;
    }
    if last_period_rule == LastPeriodRule::StopIfInTheMoney {
        out.row_mut(t_len - 1)[payoff] = 1.0;
    }
    Ok(out)
}
