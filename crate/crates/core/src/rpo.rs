//! Randomized-policy backward optimization.
//!
//! Periods are optimized one at a time from `T` down to `1`. Period `t`
//! maximizes the smooth single-period objective
//!
//! ```text
//! (1/Ω) Σ_ω p_t(ω) [ g_ω σ(b_t·Φ_ω) + c_t(ω) (1 − σ(b_t·Φ_ω)) ]
//! ```
//!
//! where `p_t` is the probability of still running at `t` under the
//! current weights of earlier periods and `c_t` the expected continuation
//! value under the already optimized later periods. Each stage is solved
//! with full-batch Adam ascent that keeps the best iterate.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::basis::FeatureTensor;
use crate::error::{Error, Result};
use crate::payoff::RewardSet;
use crate::policy::{dot, logistic, logistic_pair, WeightMatrix};
use crate::reduce::{pairwise_sum, par_sum, par_sum_vec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the gradient's infinity norm drops below this.
    pub grad_tol: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 500,
            grad_tol: 1e-6,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0
            && self.step_size.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.grad_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid Adam configuration {self:?}")))
        }
    }
}

/// Data of one single-period problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StageProblem {
    pub survival_p: Vec<f64>,
    pub continuation_c: Vec<f64>,
    pub stage_reward_g: Vec<f64>,
    /// `[path][column]`, row-major.
    pub stage_features: Vec<f64>,
    pub k: usize,
}

impl StageProblem {
    pub fn new(
        survival_p: Vec<f64>,
        continuation_c: Vec<f64>,
        stage_reward_g: Vec<f64>,
        stage_features: Vec<f64>,
        k: usize,
    ) -> Result<Self> {
        let n = survival_p.len();
        if continuation_c.len() != n || stage_reward_g.len() != n || stage_features.len() != n * k || n == 0 {
            return Err(Error::Shape("stage problem vectors disagree in length".into()));
        }
        if survival_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("survival probabilities must lie in [0, 1]".into()));
        }
        if continuation_c.iter().chain(&stage_reward_g).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument("rewards and continuation values must be finite and >= 0".into()));
        }
        Ok(StageProblem { survival_p, continuation_c, stage_reward_g, stage_features, k })
    }

    pub fn n_paths(&self) -> usize {
        self.survival_p.len()
    }

    #[inline]
    fn phi(&self, w: usize) -> &[f64] {
        &self.stage_features[w * self.k..(w + 1) * self.k]
    }
}

/// Single-period objective.
pub fn stage_objective(b: &[f64], sp: &StageProblem) -> f64 {
    let n = sp.n_paths();
    par_sum(n, |w| {
        let s = logistic(dot(b, sp.phi(w)));
        sp.survival_p[w] * (sp.stage_reward_g[w] * s + sp.continuation_c[w] * (1.0 - s))
    }) / n as f64
}

/// Analytic gradient of [`stage_objective`].
pub fn stage_gradient(b: &[f64], sp: &StageProblem) -> Vec<f64> {
    let n = sp.n_paths();
    let mut grad = par_sum_vec(n, sp.k, |w, acc| {
        let phi = sp.phi(w);
        let (s, sc) = logistic_pair(dot(b, phi));
        let scale = sp.survival_p[w] * (sp.stage_reward_g[w] - sp.continuation_c[w]) * s * sc;
        for (a, x) in acc.iter_mut().zip(phi) {
            *a += scale * x;
        }
    });
    for g in &mut grad {
        *g /= n as f64;
    }
    grad
}

/// The stage objective rewritten as `(C + Σ_j m_j σ(b·φ_j)) / Ω`, with
/// paths that share a feature vector merged into one term and paths with
/// `p (g − c) = 0` folded into the constant.
struct CompactStage {
    constant: f64,
    multipliers: Vec<f64>,
    features: Vec<f64>,
    k: usize,
    n_paths: f64,
}

impl CompactStage {
    fn new(sp: &StageProblem) -> Self {
        let k = sp.k;
        let base: Vec<f64> = (0..sp.n_paths()).map(|w| sp.survival_p[w] * sp.continuation_c[w]).collect();
        let mut constant = pairwise_sum(&base);
        let mut groups: IndexMap<Vec<u64>, f64> = IndexMap::new();
        for w in 0..sp.n_paths() {
            let m = sp.survival_p[w] * (sp.stage_reward_g[w] - sp.continuation_c[w]);
            if m == 0.0 {
                continue;
            }
            let key: Vec<u64> = sp.phi(w).iter().map(|x| (x + 0.0).to_bits()).collect();
            *groups.entry(key).or_insert(0.0) += m;
        }
        let mut multipliers = Vec::with_capacity(groups.len());
        let mut features = Vec::with_capacity(groups.len() * k);
        for (key, m) in groups {
            if key.iter().all(|&bits| bits == 0) {
                // σ(0) = 1/2 whatever the weights.
                constant += 0.5 * m;
            } else if m != 0.0 {
                multipliers.push(m);
                features.extend(key.into_iter().map(f64::from_bits));
            }
        }
        CompactStage { constant, multipliers, features, k, n_paths: sp.n_paths() as f64 }
    }

    fn value_and_gradient(&self, b: &[f64]) -> (f64, Vec<f64>) {
        let k = self.k;
        let mut acc = par_sum_vec(self.multipliers.len(), k + 1, |j, acc| {
            let phi = &self.features[j * k..(j + 1) * k];
            let (s, sc) = logistic_pair(dot(b, phi));
            let m = self.multipliers[j];
            acc[0] += m * s;
            let scale = m * s * sc;
            for (a, x) in acc[1..].iter_mut().zip(phi) {
                *a += scale * x;
            }
        });
        let value = (self.constant + acc[0]) / self.n_paths;
        let grad = acc.drain(1..).map(|g| g / self.n_paths).collect();
        (value, grad)
    }
}

/// Outcome of one Adam solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamResult {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub objective_init: f64,
    pub iterations: usize,
}

/// Full-batch Adam ascent on [`stage_objective`], returning the best iterate
/// visited (the initial point included).
pub fn adam_maximize(sp: &StageProblem, init: &[f64], cfg: &AdamConfig) -> Result<AdamResult> {
    cfg.validate()?;
    if init.len() != sp.k {
        return Err(Error::Shape(format!("init has {} weights, stage has {}", init.len(), sp.k)));
    }
    let compact = CompactStage::new(sp);
    let non_finite = |iteration, what| Error::NonFinite { stage: 0, iteration, what };
    let check = |iteration: usize, value: f64, grad: &[f64]| -> Result<()> {
        if !value.is_finite() {
            return Err(non_finite(iteration, "objective"));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(iteration, "gradient"));
        }
        Ok(())
    };

    let mut b = init.to_vec();
    let (mut value, mut grad) = compact.value_and_gradient(&b);
    check(0, value, &grad)?;
    let objective_init = value;
    let mut best = (b.clone(), value);
    let mut m = vec![0.0; sp.k];
    let mut v = vec![0.0; sp.k];
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let norm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if norm < cfg.grad_tol {
            break;
        }
        iterations += 1;
        let bias1 = 1.0 - cfg.beta1.powi(iterations as i32);
        let bias2 = 1.0 - cfg.beta2.powi(iterations as i32);
        for j in 0..sp.k {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            b[j] += cfg.step_size * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(non_finite(iterations, "weights"));
        }
        (value, grad) = compact.value_and_gradient(&b);
        check(iterations, value, &grad)?;
        if value > best.1 {
            best = (b.clone(), value);
        }
    }

    Ok(AdamResult { weights: best.0, objective: best.1, objective_init, iterations })
}

/// Per-stage diagnostics of a backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageReport {
    pub t: usize,
    pub iterations: usize,
    pub objective_init: f64,
    pub objective_best: f64,
}

#[derive(Debug, Clone)]
pub struct RpoFit {
    pub weights: WeightMatrix,
    pub stages: Vec<StageReport>,
}

impl RpoFit {
    /// Stages whose returned objective fell below the starting objective.
    pub fn regressed_stages(&self) -> Vec<usize> {
        self.stages
            .iter()
            .filter(|s| !(s.objective_best >= s.objective_init))
            .map(|s| s.t)
            .collect()
    }
}

/// Probability of not having stopped before each period, `[path][period]`.
pub fn survival_probabilities(w: &WeightMatrix, features: &FeatureTensor) -> Result<Vec<f64>> {
    w.check_against(features)?;
    let t_len = features.n_periods;
    let mut out = vec![0.0; features.n_paths * t_len];
    for (path, row) in out.chunks_mut(t_len).enumerate() {
        let mut survival = 1.0;
        for (t, p) in row.iter_mut().enumerate() {
            *p = survival;
            survival *= 1.0 - logistic(dot(w.row(t), features.row(path, t)));
        }
    }
    Ok(out)
}

/// One backward pass over `t = T..1`, starting every stage from `init`.
pub fn rpo_backward_fit(
    features: &FeatureTensor,
    rewards: &RewardSet,
    init: &WeightMatrix,
    cfg: &AdamConfig,
) -> Result<RpoFit> {
    cfg.validate()?;
    init.check_against(features)?;
    if !init.is_finite() {
        return Err(Error::InvalidArgument("initial weights must be finite".into()));
    }
    if rewards.n_paths != features.n_paths || rewards.n_periods != features.n_periods {
        return Err(Error::Shape("features and rewards disagree in shape".into()));
    }
    let n = features.n_paths;
    let t_len = features.n_periods;
    let k = features.k;
    let survival = survival_probabilities(init, features)?;

    let mut weights = init.clone();
    let mut continuation = vec![0.0; n];
    let mut stages = Vec::with_capacity(t_len);

    for period in (0..t_len).rev() {
        let sp = StageProblem {
            survival_p: (0..n).map(|w| survival[w * t_len + period]).collect(),
            continuation_c: continuation.clone(),
            stage_reward_g: rewards.stage_rewards(period),
            stage_features: features.stage_matrix(period),
            k,
        };
        let result = adam_maximize(&sp, init.row(period), cfg).map_err(|e| match e {
            Error::NonFinite { iteration, what, .. } => Error::NonFinite { stage: period + 1, iteration, what },
            other => other,
        })?;
        for (w, c) in continuation.iter_mut().enumerate() {
            let s = logistic(dot(&result.weights, sp.phi(w)));
            *c = sp.stage_reward_g[w] * s + *c * (1.0 - s);
        }
        weights.row_mut(period).copy_from_slice(&result.weights);
        stages.push(StageReport {
            t: period + 1,
            iterations: result.iterations,
            objective_init: result.objective_init,
            objective_best: result.objective,
        });
    }
    stages.reverse();
    Ok(RpoFit { weights, stages })
}
