//! Correlated multi-asset geometric Brownian motion.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the price process. Time 0 holds `initial_price` and is not
/// an exercise date; exercise dates are periods `1..=n_periods`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub n_assets: usize,
    /// Annualized drift (the risk-free rate).
    pub rate_r: f64,
    /// Annualized volatility, shared by all assets.
    pub vol_sigma: f64,
    /// Constant pairwise correlation.
    pub corr_rho: f64,
    pub initial_price: f64,
    pub n_periods: usize,
    pub horizon_years: f64,
}

impl GbmModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n_assets == 0 {
            return bad("n_assets must be positive".into());
        }
        if self.n_periods == 0 {
            return bad("n_periods must be positive".into());
        }
        if !(self.vol_sigma >= 0.0 && self.vol_sigma.is_finite()) {
            return bad(format!("vol_sigma must be >= 0, got {}", self.vol_sigma));
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return bad(format!("initial_price must be > 0, got {}", self.initial_price));
        }
        if !(self.horizon_years > 0.0 && self.horizon_years.is_finite()) {
            return bad(format!("horizon_years must be > 0, got {}", self.horizon_years));
        }
        if !self.rate_r.is_finite() {
            return bad("rate_r must be finite".into());
        }
        if !(0.0..1.0).contains(&self.corr_rho) {
            return bad(format!(
                "corr_rho must lie in [0, 1) for a positive-definite equicorrelation matrix, got {}",
                self.corr_rho
            ));
        }
        Ok(())
    }

    /// Length of one period in years.
    pub fn dt(&self) -> f64 {
        self.horizon_years / self.n_periods as f64
    }

    /// Per-period discount factor `exp(-r dt)`.
    pub fn discount_factor(&self) -> f64 {
        (-self.rate_r * self.dt()).exp()
    }

    /// Lower-triangular factor of the equicorrelation matrix, row-major.
    fn correlation_factor(&self) -> Result<Vec<f64>> {
        let n = self.n_assets;
        let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.corr_rho });
        let chol = corr
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("correlation matrix is not positive definite".into()))?;
        let l = chol.l();
        Ok((0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| l[(i, j)])
            .collect())
    }
}

/// Simulated prices, indexed `[path][period][asset]` in row-major order.
/// Period index 0 holds exercise date `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub prices: Vec<f64>,
    pub n_paths: usize,
    pub n_periods: usize,
    pub n_assets: usize,
    pub seed: u64,
    /// Global index of the first path; non-zero for sets produced by
    /// [`simulate_gbm_range`].
    pub first_path: u64,
}

impl TrajectorySet {
    #[inline]
    pub fn price(&self, path: usize, period: usize, asset: usize) -> f64 {
        self.prices[(path * self.n_periods + period) * self.n_assets + asset]
    }

    /// Prices of all assets at one `(path, period)`.
    #[inline]
    pub fn prices_at(&self, path: usize, period: usize) -> &[f64] {
        let start = (path * self.n_periods + period) * self.n_assets;
        &self.prices[start..start + self.n_assets]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let len = self.n_periods * self.n_assets;
        &self.prices[path * len..(path + 1) * len]
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream owned by one trajectory.
pub fn path_seed(seed: u64, path: u64) -> u64 {
    splitmix64(seed ^ splitmix64(path.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Simulates `n_paths` trajectories.
pub fn simulate_gbm(model: &GbmModel, n_paths: usize, seed: u64) -> Result<TrajectorySet> {
    simulate_gbm_range(model, 0, n_paths, seed)
}

/// Simulates paths `first_path .. first_path + n_paths` of the stream
/// identified by `seed`. Concatenating consecutive ranges reproduces the
/// single large set exactly.
pub fn simulate_gbm_range(
    model: &GbmModel,
    first_path: u64,
    n_paths: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    model.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be positive".into()));
    }
    let n = model.n_assets;
    let t_len = model.n_periods;
    let dt = model.dt();
    let drift = (model.rate_r - 0.5 * model.vol_sigma * model.vol_sigma) * dt;
    let vol = model.vol_sigma * dt.sqrt();
    let chol = model.correlation_factor()?;
    let identity = model.corr_rho == 0.0;
    let log_p0 = model.initial_price.ln();

    let mut prices = vec![0.0; n_paths * t_len * n];
    prices
        .par_chunks_mut(t_len * n)
        .enumerate()
        .for_each(|(w, out)| {
            let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, first_path + w as u64));
            let mut log_p = vec![log_p0; n];
            let mut eps = vec![0.0; n];
            for t in 0..t_len {
                for e in eps.iter_mut() {
                    *e = StandardNormal.sample(&mut rng);
                }
                for i in 0..n {
                    let z = if identity {
                        eps[i]
                    } else {
                        (0..=i).map(|j| chol[i * n + j] * eps[j]).sum()
                    };
                    log_p[i] += drift + vol * z;
                    out[t * n + i] = log_p[i].exp();
                }
            }
        });

    Ok(TrajectorySet {
        prices,
        n_paths,
        n_periods: t_len,
        n_assets: n,
        seed,
        first_path,
    })
}
