//! Replicated train/test benchmarks over methods, basis sets and initial
//! prices, plus the CSV tables they produce.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize};

use crate::basis::{build_features, build_features_with, BasisSpec, FeatureTensor};
use crate::bounds::{generalization_lower_bound, rademacher_bound, BoundInputs, NormType};
use crate::error::{Error, Result};
use crate::io::{PolicyWeights, WeightFile};
use crate::lsm::{eval_lsm, lsm_fit, lsm_to_linear_policy, LastPeriodRule, LsmFit};
use crate::payoff::{maxcall_rewards, RewardSet};
use crate::policy::{eval_deterministic, eval_randomized, extract_thresholds, mean_and_se, ThresholdForm, WeightMatrix};
use crate::process::{simulate_gbm, splitmix64, GbmModel, TrajectorySet};
use crate::rpo::{rpo_backward_fit, AdamConfig, StageReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Lsm,
    Rpo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lsm => "LSM",
            Method::Rpo => "RPO",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LSM" => Ok(Method::Lsm),
            "RPO" => Ok(Method::Rpo),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub n_assets: usize,
    pub rate_r: f64,
    pub vol_sigma: f64,
    #[serde(default)]
    pub corr_rho: f64,
    /// Either `initial_prices = [..]` or a single `initial_price`.
    #[serde(alias = "initial_price", deserialize_with = "one_or_many")]
    pub initial_prices: Vec<f64>,
    pub strike: f64,
    pub barrier: f64,
    pub n_periods: usize,
    pub horizon_years: f64,
}

impl InstanceConfig {
    pub fn model(&self, initial_price: f64) -> GbmModel {
        GbmModel {
            n_assets: self.n_assets,
            rate_r: self.rate_r,
            vol_sigma: self.vol_sigma,
            corr_rho: self.corr_rho,
            initial_price,
            n_periods: self.n_periods,
            horizon_years: self.horizon_years,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_reps: usize,
    #[serde(default)]
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub standardize: bool,
    pub verbose: bool,
    pub emit_thresholds: bool,
    pub emit_bounds: bool,
    /// Write measured fit times; off gives byte-reproducible `results.csv`.
    pub record_timing: bool,
    pub bounds_delta: f64,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            standardize: false,
            verbose: false,
            emit_thresholds: false,
            emit_bounds: false,
            record_timing: true,
            bounds_delta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub sample: SampleConfig,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub flags: Flags,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sample;
        if s.n_reps == 0 || s.n_train == 0 || s.n_test == 0 {
            return Err(Error::Config("n_reps, n_train and n_test must be at least 1".into()));
        }
        if self.instance.initial_prices.is_empty() {
            return Err(Error::Config("no initial prices".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods".into()));
        }
        for p in &self.instance.initial_prices {
            self.instance.model(*p).validate()?;
        }
        if !(self.instance.strike >= 0.0 && self.instance.barrier > 0.0) {
            return Err(Error::Config("strike must be >= 0 and barrier > 0".into()));
        }
        for m in &self.methods {
            BasisSpec::parse(&m.basis)?;
        }
        self.adam.validate()?;
        if !(self.flags.bounds_delta > 0.0 && self.flags.bounds_delta <= 1.0) {
            return Err(Error::Config("bounds_delta must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Train,
    Test,
}

/// Seed of one replication's train or test sample. Independent of the
/// initial price, so price levels share random numbers.
pub fn derive_seed(base_seed: u64, rep: usize, role: SeedRole) -> u64 {
    let role = match role {
        SeedRole::Train => 0x7261_696e,
        SeedRole::Test => 0x7465_7374,
    };
    splitmix64(splitmix64(base_seed ^ splitmix64(rep as u64)).wrapping_add(role))
}

/// Simulated sample with its rewards.
pub struct Sample {
    pub trajectories: TrajectorySet,
    pub rewards: RewardSet,
}

pub fn simulate_sample(instance: &InstanceConfig, initial_price: f64, n_paths: usize, seed: u64) -> Result<Sample> {
    let model = instance.model(initial_price);
    let trajectories = simulate_gbm(&model, n_paths, seed)?;
    let rewards = maxcall_rewards(&trajectories, instance.strike, instance.barrier, model.discount_factor())?;
    Ok(Sample { trajectories, rewards })
}

/// A fitted policy plus its training diagnostics.
#[derive(Debug, Clone)]
pub struct FittedPolicy {
    pub file: WeightFile,
    pub stages: Vec<StageReport>,
    /// Randomized objective on the training features (RPO only).
    pub train_randomized: Option<f64>,
    pub train_features_q: f64,
}

fn lsm_cached<'a>(
    cache: &'a mut HashMap<String, LsmFit>,
    features: &FeatureTensor,
    rewards: &RewardSet,
) -> Result<&'a LsmFit> {
    if !cache.contains_key(&features.fingerprint) {
        cache.insert(features.fingerprint.clone(), lsm_fit(features, rewards)?);
    }
    Ok(&cache[&features.fingerprint])
}

/// Fits one method on a training sample. LSM always regresses on raw
/// features; `standardize` only affects RPO.
pub fn fit_method(
    method: Method,
    basis: &BasisSpec,
    train: &Sample,
    adam: &AdamConfig,
    standardize: bool,
) -> Result<FittedPolicy> {
    fit_method_cached(method, basis, train, adam, standardize, &mut HashMap::new())
}

fn fit_method_cached(
    method: Method,
    basis: &BasisSpec,
    train: &Sample,
    adam: &AdamConfig,
    standardize: bool,
    cache: &mut HashMap<String, LsmFit>,
) -> Result<FittedPolicy> {
    let raw_spec = basis.clone().with_standardize(false);
    let raw = build_features(&train.trajectories, &train.rewards, &raw_spec)?;
    match method {
        Method::Lsm => {
            let fit = lsm_cached(cache, &raw, &train.rewards)?;
            Ok(FittedPolicy {
                file: WeightFile {
                    weights: PolicyWeights::Lsm(fit.weights.clone()),
                    column_names: raw.column_names.clone(),
                    standardizer: None,
                },
                stages: Vec::new(),
                train_randomized: None,
                train_features_q: raw.feature_bound_q,
            })
        }
        Method::Rpo => {
            let warm = match raw.payoff_column {
                Some(col) => {
                    let fit = lsm_cached(cache, &raw, &train.rewards)?;
                    Some(lsm_to_linear_policy(
                        &fit.weights,
                        train.rewards.discount_beta,
                        Some(col),
                        LastPeriodRule::default(),
                    )?)
                }
                None => None,
            };
            let features = if standardize {
                build_features(&train.trajectories, &train.rewards, &raw_spec.clone().with_standardize(true))?
            } else {
                raw
            };
            let init = match (warm, &features.standardizer) {
                (Some(w), None) => w,
                (Some(w), Some(s)) => {
                    // Same inner products on standardized features; zero
                    // init when the shift cannot be absorbed.
                    let rows: Option<Vec<Vec<f64>>> =
                        (0..w.n_periods).map(|t| s.to_standardized_weights(w.row(t))).collect();
                    match rows {
                        Some(rows) => WeightMatrix::from_rows(&rows, features.fingerprint.clone())?,
                        None => WeightMatrix::zeros_like(&features),
                    }
                }
                (None, _) => WeightMatrix::zeros_like(&features),
            };
            let fit = rpo_backward_fit(&features, &train.rewards, &init, adam)?;
            let train_randomized = eval_randomized(&fit.weights, &features, &train.rewards)?;
            Ok(FittedPolicy {
                file: WeightFile {
                    weights: PolicyWeights::Linear(fit.weights),
                    column_names: features.column_names.clone(),
                    standardizer: features.standardizer.clone(),
                },
                stages: fit.stages,
                train_randomized: Some(train_randomized),
                train_features_q: features.feature_bound_q,
            })
        }
    }
}

/// Basis specification a weight fingerprint was built from.
pub fn spec_from_fingerprint(fingerprint: &str) -> Result<BasisSpec> {
    let mut parts = fingerprint.split(';');
    let label = parts.next().unwrap_or_default();
    let standardize = parts.any(|p| p == "std=1");
    Ok(BasisSpec::parse(label)?.with_standardize(standardize))
}

/// Out-of-sample rewards of a stored policy on a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub deterministic: f64,
    /// Only for linear policies.
    pub randomized: Option<f64>,
}

pub fn evaluate_policy(file: &WeightFile, sample: &Sample) -> Result<Evaluation> {
    let spec = spec_from_fingerprint(file.weights.fingerprint())?;
    let features = build_features_with(&sample.trajectories, &sample.rewards, &spec, file.standardizer.as_ref())?;
    if features.fingerprint != file.weights.fingerprint() {
        return Err(Error::Shape(format!(
            "weights fitted on `{}` but sample features are `{}`",
            file.weights.fingerprint(),
            features.fingerprint
        )));
    }
    match &file.weights {
        PolicyWeights::Linear(w) => Ok(Evaluation {
            deterministic: eval_deterministic(w, &features, &sample.rewards)?,
            randomized: Some(eval_randomized(w, &features, &sample.rewards)?),
        }),
        PolicyWeights::Lsm(w) => Ok(Evaluation { deterministic: eval_lsm(w, &features, &sample.rewards)?, randomized: None }),
    }
}

/// Per-period payoff thresholds of a (one, payoff) policy. The last LSM
/// period stops whenever the payoff is positive, i.e. threshold 0.
pub fn policy_thresholds(file: &WeightFile, beta: f64) -> Result<Vec<(usize, Option<f64>)>> {
    match &file.weights {
        PolicyWeights::Linear(w) => Ok(extract_thresholds(w, ThresholdForm::RpoOnePayoff, beta)?
            .into_iter()
            .map(|th| (th.t, th.value))
            .collect()),
        PolicyWeights::Lsm(w) => {
            let mut out: Vec<(usize, Option<f64>)> = extract_thresholds(&w.as_matrix(), ThresholdForm::LsmOnePayoff, beta)?
                .into_iter()
                .map(|th| (th.t, th.value))
                .collect();
            out.push((w.n_periods, Some(0.0)));
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub rep: usize,
    pub train_reward: f64,
    pub test_reward: f64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub mean: f64,
    pub se: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub rep: usize,
    pub t: usize,
    pub threshold: Option<f64>,
    pub defined: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub rep: usize,
    pub norm_type: NormType,
    pub radius_b: f64,
    pub feature_bound_q: f64,
    pub reward_bound_g: f64,
    pub k: usize,
    pub t: usize,
    pub n_paths: usize,
    pub delta: f64,
    pub train_randomized: f64,
    pub rademacher: f64,
    pub lower_bound: f64,
    pub lower_bound_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRow {
    pub method: Method,
    pub basis: String,
    pub initial_price: f64,
    pub rep: usize,
    pub t: usize,
    pub iterations: usize,
    pub objective_init: f64,
    pub objective_best: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub results: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<FailureRow>,
    pub thresholds: Vec<ThresholdRow>,
    pub bounds: Vec<BoundRow>,
    pub stages: Vec<StageRow>,
    /// Notes about outputs that were skipped.
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    /// RPO stages whose returned objective fell below the warm start.
    pub fn stage_regressions(&self) -> usize {
        self.stages.iter().filter(|s| !(s.objective_best >= s.objective_init)).count()
    }

    pub fn summary_for(&self, method: Method, basis: &str, initial_price: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.basis == basis && s.initial_price == initial_price)
    }

    /// Writes the CSV tables into `dir` and returns their paths.
    pub fn write(&self, dir: &Path, flags: &Flags) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = vec![
            write_csv(&dir.join("results.csv"), RESULTS_HEADER, &self.results)?,
            write_csv(&dir.join("summary.csv"), SUMMARY_HEADER, &self.summary)?,
        ];
        if !self.failures.is_empty() {
            written.push(write_csv(&dir.join("failures.csv"), FAILURES_HEADER, &self.failures)?);
        }
        if flags.emit_thresholds {
            written.push(write_csv(&dir.join("thresholds.csv"), THRESHOLDS_HEADER, &self.thresholds)?);
        }
        if flags.emit_bounds {
            written.push(write_csv(&dir.join("bounds.csv"), BOUNDS_HEADER, &self.bounds)?);
        }
        if flags.verbose {
            written.push(write_csv(&dir.join("stages.csv"), STAGES_HEADER, &self.stages)?);
        }
        Ok(written)
    }
}

/// Writes `rows` under an explicit header, so empty tables keep it.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<PathBuf> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub const RESULTS_HEADER: &[&str] =
    &["method", "basis", "initial_price", "rep", "train_reward", "test_reward", "fit_seconds"];
pub const SUMMARY_HEADER: &[&str] = &["method", "basis", "initial_price", "mean", "se", "n_reps"];
pub const FAILURES_HEADER: &[&str] = &["method", "basis", "initial_price", "rep", "error"];
pub const THRESHOLDS_HEADER: &[&str] = &["method", "basis", "initial_price", "rep", "t", "threshold", "defined"];
pub const BOUNDS_HEADER: &[&str] = &[
    "method",
    "basis",
    "initial_price",
    "rep",
    "norm_type",
    "radius_b",
    "feature_bound_q",
    "reward_bound_g",
    "k",
    "t",
    "n_paths",
    "delta",
    "train_randomized",
    "rademacher",
    "lower_bound",
    "lower_bound_empirical",
];
pub const STAGES_HEADER: &[&str] =
    &["method", "basis", "initial_price", "rep", "t", "iterations", "objective_init", "objective_best"];

fn weight_norm(w: &[f64], norm: NormType) -> f64 {
    match norm {
        NormType::L1 => w.iter().map(|x| x.abs()).sum(),
        NormType::L2 => w.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormType::LInf => w.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

struct Cell<'a> {
    method: Method,
    basis_label: &'a str,
    spec: BasisSpec,
}

/// Runs every (replication, initial price, method) cell. Failures are
/// recorded and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let flags = &cfg.flags;
    let cells: Vec<Cell> = cfg
        .methods
        .iter()
        .map(|m| Ok(Cell { method: m.method, basis_label: &m.basis, spec: BasisSpec::parse(&m.basis)? }))
        .collect::<Result<_>>()?;
    let mut out = ExperimentOutput::default();

    for rep in 0..cfg.sample.n_reps {
        let train_seed = derive_seed(cfg.sample.base_seed, rep, SeedRole::Train);
        let test_seed = derive_seed(cfg.sample.base_seed, rep, SeedRole::Test);
        for &price in &cfg.instance.initial_prices {
            let samples = simulate_sample(&cfg.instance, price, cfg.sample.n_train, train_seed).and_then(|train| {
                Ok((train, simulate_sample(&cfg.instance, price, cfg.sample.n_test, test_seed)?))
            });
            let (train, test) = match samples {
                Ok(s) => s,
                Err(e) => {
                    for cell in &cells {
                        out.failures.push(FailureRow {
                            method: cell.method,
                            basis: cell.basis_label.to_string(),
                            initial_price: price,
                            rep,
                            error: e.to_string(),
                        });
                    }
                    continue;
                }
            };
            let mut cache = HashMap::new();
            for cell in &cells {
                let started = Instant::now();
                let outcome = fit_method_cached(cell.method, &cell.spec, &train, &cfg.adam, flags.standardize, &mut cache)
                    .and_then(|fitted| {
                        let seconds = started.elapsed().as_secs_f64();
                        let train_eval = evaluate_policy(&fitted.file, &train)?;
                        let test_eval = evaluate_policy(&fitted.file, &test)?;
                        Ok((fitted, seconds, train_eval, test_eval))
                    });
                let (fitted, seconds, train_eval, test_eval) = match outcome {
                    Ok(x) => x,
                    Err(e) => {
                        out.failures.push(FailureRow {
                            method: cell.method,
                            basis: cell.basis_label.to_string(),
                            initial_price: price,
                            rep,
                            error: e.to_string(),
                        });
                        continue;
                    }
                };
                if flags.verbose {
                    eprintln!(
                        "rep {rep} p0 {price} {} ({}): train {:.4} test {:.4} in {seconds:.1}s",
                        cell.method, cell.basis_label, train_eval.deterministic, test_eval.deterministic
                    );
                }
                out.results.push(ResultRow {
                    method: cell.method,
                    basis: cell.basis_label.to_string(),
                    initial_price: price,
                    rep,
                    train_reward: train_eval.deterministic,
                    test_reward: test_eval.deterministic,
                    fit_seconds: if flags.record_timing { seconds } else { 0.0 },
                });
                out.stages.extend(fitted.stages.iter().map(|s| StageRow {
                    method: cell.method,
                    basis: cell.basis_label.to_string(),
                    initial_price: price,
                    rep,
                    t: s.t,
                    iterations: s.iterations,
                    objective_init: s.objective_init,
                    objective_best: s.objective_best,
                }));

                if flags.emit_thresholds && rep == 0 {
                    match policy_thresholds(&fitted.file, train.rewards.discount_beta) {
                        Ok(ths) => out.thresholds.extend(ths.into_iter().map(|(t, value)| ThresholdRow {
                            method: cell.method,
                            basis: cell.basis_label.to_string(),
                            initial_price: price,
                            rep,
                            t,
                            threshold: value,
                            defined: u8::from(value.is_some()),
                        })),
                        Err(e) => out.notes.push(format!("thresholds skipped for {} ({}): {e}", cell.method, cell.basis_label)),
                    }
                }

                if let (true, PolicyWeights::Linear(w), Some(j_hat)) =
                    (flags.emit_bounds, &fitted.file.weights, fitted.train_randomized)
                {
                    for norm_type in NormType::ALL {
                        let inputs = BoundInputs {
                            norm_type,
                            radius_b: weight_norm(&w.weights, norm_type),
                            feature_bound_q: fitted.train_features_q,
                            reward_bound_g: train.rewards.reward_upper_bound,
                            k: w.k,
                            t: w.n_periods,
                            n_paths: cfg.sample.n_train,
                            delta: flags.bounds_delta,
                        };
                        out.bounds.push(BoundRow {
                            method: cell.method,
                            basis: cell.basis_label.to_string(),
                            initial_price: price,
                            rep,
                            norm_type,
                            radius_b: inputs.radius_b,
                            feature_bound_q: inputs.feature_bound_q,
                            reward_bound_g: inputs.reward_bound_g,
                            k: inputs.k,
                            t: inputs.t,
                            n_paths: inputs.n_paths,
                            delta: inputs.delta,
                            train_randomized: j_hat,
                            rademacher: rademacher_bound(&inputs)?,
                            lower_bound: generalization_lower_bound(j_hat, &inputs, false)?,
                            lower_bound_empirical: generalization_lower_bound(j_hat, &inputs, true)?,
                        });
                    }
                }
            }
        }
    }

    for cell in &cells {
        for &price in &cfg.instance.initial_prices {
            let rewards: Vec<f64> = out
                .results
                .iter()
                .filter(|r| r.method == cell.method && r.basis == cell.basis_label && r.initial_price == price)
                .map(|r| r.test_reward)
                .collect();
            if rewards.is_empty() {
                continue;
            }
            let (mean, se) = mean_and_se(&rewards);
            out.summary.push(SummaryRow {
                method: cell.method,
                basis: cell.basis_label.to_string(),
                initial_price: price,
                mean,
                se,
                n_reps: rewards.len(),
            });
        }
    }
    Ok(out)
}
