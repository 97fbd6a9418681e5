//! Linear stopping policies and their sample-average rewards.
//!
//! A weight row `b_t` prescribes stopping at period `t` when
//! `b_t · Φ(x(ω,t)) > 0` (deterministic policy) or with probability
//! `σ(b_t · Φ(x(ω,t)))` (randomized policy).

use std::fmt;

use crate::basis::{BasisFamily, BasisSpec, FeatureTensor};
use crate::error::{Error, Result};
use crate::payoff::RewardSet;
use crate::reduce::{pairwise_sum, par_sum};

/// Logistic response `e^u / (1 + e^u)`, evaluated without overflow.
/// `(σ(u), σ(-u))` from a single exponential.
#[inline]
pub fn logistic_pair(u: f64) -> (f64, f64) {
    let e = (-u.abs()).exp();
    let big = 1.0 / (1.0 + e);
    let small = e * big;
    if u >= 0.0 {
        (big, small)
    } else {
        (small, big)
    }
}

#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Policy weights, one row of `k` entries per period.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub weights: Vec<f64>,
    pub n_periods: usize,
    pub k: usize,
    pub basis_fingerprint: String,
}

impl WeightMatrix {
    pub fn zeros(n_periods: usize, k: usize, basis_fingerprint: impl Into<String>) -> Self {
        WeightMatrix {
            weights: vec![0.0; n_periods * k],
            n_periods,
            k,
            basis_fingerprint: basis_fingerprint.into(),
        }
    }

    /// Zero weights shaped for `features`.
    pub fn zeros_like(features: &FeatureTensor) -> Self {
        Self::zeros(features.n_periods, features.k, features.fingerprint.clone())
    }

    pub fn from_rows(rows: &[Vec<f64>], basis_fingerprint: impl Into<String>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("weight rows have different lengths".into()));
        }
        Ok(WeightMatrix {
            weights: rows.concat(),
            n_periods: rows.len(),
            k,
            basis_fingerprint: basis_fingerprint.into(),
        })
    }

    /// Row for 0-based period index `period` (date `period + 1`).
    #[inline]
    pub fn row(&self, period: usize) -> &[f64] {
        &self.weights[period * self.k..(period + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, period: usize) -> &mut [f64] {
        &mut self.weights[period * self.k..(period + 1) * self.k]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        WeightMatrix {
            weights: self.weights.iter().map(|b| b * alpha).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|b| b.is_finite())
    }

    pub fn check_against(&self, features: &FeatureTensor) -> Result<()> {
        if self.n_periods != features.n_periods || self.k != features.k {
            return Err(Error::Shape(format!(
                "weights are {}x{} but features are {} periods x {} columns",
                self.n_periods, self.k, features.n_periods, features.k
            )));
        }
        Ok(())
    }
}

/// Stopping period, 1-based, or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopTime {
    At(usize),
    Never,
}

impl fmt::Display for StopTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopTime::At(t) => write!(f, "{t}"),
            StopTime::Never => f.write_str("inf"),
        }
    }
}

fn check_rewards(features: &FeatureTensor, rewards: &RewardSet) -> Result<()> {
    if features.n_paths != rewards.n_paths || features.n_periods != rewards.n_periods {
        return Err(Error::Shape(format!(
            "features are {}x{} but rewards are {}x{}",
            features.n_paths, features.n_periods, rewards.n_paths, rewards.n_periods
        )));
    }
    Ok(())
}

fn stop_time_of(w: &WeightMatrix, features: &FeatureTensor, path: usize) -> StopTime {
    (0..features.n_periods)
        .find(|&t| dot(w.row(t), features.row(path, t)) > 0.0)
        .map_or(StopTime::Never, |t| StopTime::At(t + 1))
}

/// First period with a strictly positive score on each path.
pub fn stopping_times_deterministic(w: &WeightMatrix, features: &FeatureTensor) -> Result<Vec<StopTime>> {
    w.check_against(features)?;
    use rayon::prelude::*;
    Ok((0..features.n_paths)
        .into_par_iter()
        .map(|path| stop_time_of(w, features, path))
        .collect())
}

/// Reward collected on each path by the deterministic policy.
pub fn deterministic_path_rewards(
    w: &WeightMatrix,
    features: &FeatureTensor,
    rewards: &RewardSet,
) -> Result<Vec<f64>> {
    check_rewards(features, rewards)?;
    let taus = stopping_times_deterministic(w, features)?;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(path, tau)| match tau {
            StopTime::At(t) => rewards.reward(path, t - 1),
            StopTime::Never => 0.0,
        })
        .collect())
}

/// Sample-average reward of the deterministic policy, Ĵ_D.
pub fn eval_deterministic(w: &WeightMatrix, features: &FeatureTensor, rewards: &RewardSet) -> Result<f64> {
    w.check_against(features)?;
    check_rewards(features, rewards)?;
    let total = par_sum(features.n_paths, |path| match stop_time_of(w, features, path) {
        StopTime::At(t) => rewards.reward(path, t - 1),
        StopTime::Never => 0.0,
    });
    Ok(total / features.n_paths as f64)
}

fn randomized_path_value(w: &WeightMatrix, features: &FeatureTensor, rewards: &RewardSet, path: usize) -> f64 {
    let mut survival = 1.0;
    let mut value = 0.0;
    for t in 0..features.n_periods {
        let s = logistic(dot(w.row(t), features.row(path, t)));
        value += rewards.reward(path, t) * survival * s;
        survival *= 1.0 - s;
    }
    value
}

/// Expected reward of the randomized policy on each path, conditional on
/// the path.
pub fn randomized_path_rewards(
    w: &WeightMatrix,
    features: &FeatureTensor,
    rewards: &RewardSet,
) -> Result<Vec<f64>> {
    w.check_against(features)?;
    check_rewards(features, rewards)?;
    Ok((0..features.n_paths)
        .map(|path| randomized_path_value(w, features, rewards, path))
        .collect())
}

/// Sample-average expected reward of the randomized policy, Ĵ_R.
pub fn eval_randomized(w: &WeightMatrix, features: &FeatureTensor, rewards: &RewardSet) -> Result<f64> {
    w.check_against(features)?;
    check_rewards(features, rewards)?;
    let total = par_sum(features.n_paths, |path| randomized_path_value(w, features, rewards, path));
    Ok(total / features.n_paths as f64)
}

/// Per-path distribution of the randomized stopping time: columns are
/// `P(τ = 1), …, P(τ = T), P(τ = ∞)`, flattened row-major.
pub fn stop_distribution(w: &WeightMatrix, features: &FeatureTensor) -> Result<Vec<f64>> {
    w.check_against(features)?;
    let t_len = features.n_periods;
    let mut out = vec![0.0; features.n_paths * (t_len + 1)];
    for (path, row) in out.chunks_mut(t_len + 1).enumerate() {
        let mut survival = 1.0;
        for t in 0..t_len {
            let s = logistic(dot(w.row(t), features.row(path, t)));
            row[t] = survival * s;
            survival *= 1.0 - s;
        }
        row[t_len] = survival;
    }
    Ok(out)
}

/// Threshold algebra for (one, payoff) architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdForm {
    /// Stop iff `b_one + b_payoff g′ > 0`, i.e. `g′ > -b_one / b_payoff`.
    RpoOnePayoff,
    /// LSM regression weights: stop iff `β^t g′ > b_one + b_payoff g′`.
    LsmOnePayoff,
}

/// Payoff threshold of one period; `None` when the rule is not a
/// threshold on g′ from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub t: usize,
    pub value: Option<f64>,
}

/// Per-period thresholds on the undiscounted payoff.
pub fn extract_thresholds(w: &WeightMatrix, form: ThresholdForm, beta: f64) -> Result<Vec<Threshold>> {
    let label = w.basis_fingerprint.split(';').next().unwrap_or_default();
    let spec = BasisSpec::parse(label)
        .map_err(|_| Error::InvalidArgument(format!("unrecognized basis fingerprint `{}`", w.basis_fingerprint)))?;
    if w.k != 2
        || spec.families.len() != 2
        || !spec.contains(BasisFamily::One)
        || !spec.contains(BasisFamily::Payoff)
        || w.basis_fingerprint.contains("std=1")
    {
        return Err(Error::InvalidArgument(format!(
            "thresholds need an unstandardized (one, payoff) architecture, got `{}`",
            w.basis_fingerprint
        )));
    }
    let one = spec.one_column(1).unwrap_or(0);
    let payoff = spec.payoff_column(1).unwrap_or(1);
    Ok((0..w.n_periods)
        .map(|period| {
            let t = period + 1;
            let row = w.row(period);
            let (b_one, b_payoff) = (row[one], row[payoff]);
            let value = match form {
                ThresholdForm::RpoOnePayoff => (b_payoff > 0.0).then(|| -b_one / b_payoff),
                ThresholdForm::LsmOnePayoff => {
                    let denom = beta.powi(t as i32) - b_payoff;
                    (denom > 0.0).then(|| b_one / denom)
                }
            };
            Threshold { t, value }
        })
        .collect())
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_instance(
        rng: &mut ChaCha8Rng,
        n_paths: usize,
        n_periods: usize,
        k: usize,
    ) -> (FeatureTensor, RewardSet) {
        let mut values = Vec::with_capacity(n_paths * n_periods * k);
        for _ in 0..n_paths * n_periods {
            values.push(1.0);
            for _ in 1..k {
                values.push(rng.random_range(-2.0..2.0));
            }
        }
        let rewards: Vec<f64> = (0..n_paths * n_periods).map(|_| rng.random_range(0.0..5.0)).collect();
        (
            FeatureTensor::from_values(values, n_paths, n_periods, k).unwrap(),
            RewardSet::from_rewards(rewards, n_paths, n_periods, 1.0).unwrap(),
        )
    }

    pub(crate) fn random_weights(rng: &mut ChaCha8Rng, n_periods: usize, k: usize) -> WeightMatrix {
        let rows: Vec<Vec<f64>> = (0..n_periods)
            .map(|_| (0..k).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        WeightMatrix::from_rows(&rows, "custom").unwrap()
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        let hi = logistic(710.0);
        assert_eq!(hi, 1.0);
        assert!(logistic(-710.0) >= 0.0);
        assert!((logistic(3f64.ln()) - 0.75).abs() < 1e-15);
        for u in [-30.0, -2.5, 0.0, 0.1, 7.0, 40.0, 800.0] {
            assert!((logistic(u) + logistic(-u) - 1.0).abs() < 1e-15);
            let (s, sc) = logistic_pair(u);
            assert!((s - logistic(u)).abs() <= 1e-16 * s.max(1e-300));
            assert!((sc - logistic(-u)).abs() <= 1e-16 * sc.max(1e-300) || sc == logistic(-u));
        }
    }

    #[test]
    fn zero_weights_never_stop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (f, r) = random_instance(&mut rng, 10, 3, 2);
        let w = WeightMatrix::zeros_like(&f);
        assert!(stopping_times_deterministic(&w, &f).unwrap().iter().all(|t| *t == StopTime::Never));
        assert_eq!(eval_deterministic(&w, &f, &r).unwrap(), 0.0);
    }

    #[test]
    fn positive_constant_weight_stops_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (f, r) = random_instance(&mut rng, 10, 3, 1);
        let w = WeightMatrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]], "custom").unwrap();
        assert!(stopping_times_deterministic(&w, &f).unwrap().iter().all(|t| *t == StopTime::At(1)));
        let expected = (0..10).map(|p| r.reward(p, 0)).sum::<f64>() / 10.0;
        assert!((eval_deterministic(&w, &f, &r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn stopping_times_match_direct_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, _) = random_instance(&mut rng, 40, 6, 3);
        let w = random_weights(&mut rng, 6, 3);
        let taus = stopping_times_deterministic(&w, &f).unwrap();
        for (path, tau) in taus.iter().enumerate() {
            let mut expected = StopTime::Never;
            for t in 0..6 {
                let mut u = 0.0;
                for j in 0..3 {
                    u += w.weights[t * 3 + j] * f.values[(path * 6 + t) * 3 + j];
                }
                if u > 0.0 {
                    expected = StopTime::At(t + 1);
                    break;
                }
            }
            assert_eq!(*tau, expected);
        }
    }

    #[test]
    fn deterministic_value_matches_exhaustive_indicator_form() {
        // 3 trajectories, T = 2: sum over t of g * prod(1{u<=0}) * 1{u>0}.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (f, r) = random_instance(&mut rng, 3, 2, 2);
        for _ in 0..20 {
            let w = random_weights(&mut rng, 2, 2);
            let mut total = 0.0;
            for path in 0..3 {
                let u1 = dot(w.row(0), f.row(path, 0));
                let u2 = dot(w.row(1), f.row(path, 1));
                let i = |c: bool| if c { 1.0 } else { 0.0 };
                total += r.reward(path, 0) * i(u1 > 0.0) + r.reward(path, 1) * i(u1 <= 0.0) * i(u2 > 0.0);
            }
            assert!((eval_deterministic(&w, &f, &r).unwrap() - total / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_randomized_halves() {
        let f = FeatureTensor::from_values(vec![1.0, 1.0], 1, 2, 1).unwrap();
        let r = RewardSet::from_rewards(vec![1.0, 1.0], 1, 2, 1.0).unwrap();
        let w = WeightMatrix::zeros_like(&f);
        assert!((eval_randomized(&w, &f, &r).unwrap() - 0.75).abs() < 1e-15);
        let dist = stop_distribution(&w, &f).unwrap();
        assert_eq!(dist, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn saturated_first_period() {
        let f = FeatureTensor::from_values(vec![1.0, 1.0, 1.0], 1, 3, 1).unwrap();
        let w = WeightMatrix::from_rows(&[vec![800.0], vec![0.0], vec![0.0]], "custom").unwrap();
        let dist = stop_distribution(&w, &f).unwrap();
        assert!((dist[0] - 1.0).abs() < 1e-300);
        assert!(dist[1..].iter().all(|&p| p < 1e-300));
    }

    #[test]
    fn distribution_matches_product_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (f, r) = random_instance(&mut rng, 25, 5, 3);
        let w = random_weights(&mut rng, 5, 3);
        let dist = stop_distribution(&w, &f).unwrap();
        let mut expected_value = 0.0;
        for path in 0..25 {
            let row = &dist[path * 6..(path + 1) * 6];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for t in 0..5 {
                let mut p = logistic(dot(w.row(t), f.row(path, t)));
                for s in 0..t {
                    p *= 1.0 - logistic(dot(w.row(s), f.row(path, s)));
                }
                assert!((row[t] - p).abs() < 1e-14);
                expected_value += r.reward(path, t) * row[t];
            }
        }
        let jr = eval_randomized(&w, &f, &r).unwrap();
        assert!((jr - expected_value / 25.0).abs() <= 1e-10 * jr.abs().max(1.0));
    }

    #[test]
    fn large_scaling_recovers_deterministic_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (f, r) = random_instance(&mut rng, 60, 4, 3);
        let w = random_weights(&mut rng, 4, 3);
        let min_abs = (0..60)
            .flat_map(|p| (0..4).map(move |t| (p, t)))
            .map(|(p, t)| dot(w.row(t), f.row(p, t)).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(min_abs > 1e-8);
        let jd = eval_deterministic(&w, &f, &r).unwrap();
        let gaps: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|&a| (eval_randomized(&w.scaled(a), &f, &r).unwrap() - jd).abs())
            .collect();
        assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2]);
        assert!(gaps[2] < 1e-6 * r.reward_upper_bound);
    }

    #[test]
    fn thresholds() {
        let rpo = WeightMatrix::from_rows(&[vec![-5.0, 1.0], vec![3.0, 0.0]], "one,payoff;n=1;std=0").unwrap();
        let th = extract_thresholds(&rpo, ThresholdForm::RpoOnePayoff, 0.9).unwrap();
        assert_eq!(th[0].value, Some(5.0));
        assert_eq!(th[1].value, None);

        let lsm = WeightMatrix::from_rows(&[vec![2.0, 0.5]], "one,payoff;n=1;std=0").unwrap();
        let th = extract_thresholds(&lsm, ThresholdForm::LsmOnePayoff, 0.9).unwrap();
        assert!((th[0].value.unwrap() - 5.0).abs() < 1e-12);

        let swapped = WeightMatrix::from_rows(&[vec![1.0, -5.0]], "payoff,one;n=1;std=0").unwrap();
        let th = extract_thresholds(&swapped, ThresholdForm::RpoOnePayoff, 0.9).unwrap();
        assert_eq!(th[0].value, Some(5.0));

        let wrong = WeightMatrix::from_rows(&[vec![1.0, 2.0]], "KOind,payoff;n=8;std=0").unwrap();
        assert!(extract_thresholds(&wrong, ThresholdForm::RpoOnePayoff, 0.9).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (f, r) = random_instance(&mut rng, 5, 3, 2);
        let w = WeightMatrix::zeros(2, 2, "custom");
        assert!(eval_deterministic(&w, &f, &r).is_err());
        assert!(eval_randomized(&w, &f, &r).is_err());
    }

    proptest! {
        #[test]
        fn objectives_lie_in_reward_range(seed in 0u64..500, scale in 0.01f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, r) = random_instance(&mut rng, 12, 4, 3);
            let w = random_weights(&mut rng, 4, 3).scaled(scale);
            let jd = eval_deterministic(&w, &f, &r).unwrap();
            let jr = eval_randomized(&w, &f, &r).unwrap();
            prop_assert!((0.0..=r.reward_upper_bound).contains(&jd));
            prop_assert!(jr >= 0.0 && jr <= r.reward_upper_bound * (1.0 + 1e-12));
            let dist = stop_distribution(&w, &f).unwrap();
            for row in dist.chunks(5) {
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
