//! Basis-function families and the realized feature tensor.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoff::RewardSet;
use crate::process::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisFamily {
    One,
    Prices,
    Payoff,
    KoInd,
    PricesKo,
    MaxPriceKo,
    Max2PriceKo,
    Prices2Ko,
}

impl BasisFamily {
    /// Number of columns the family contributes for `n_assets` assets.
    pub fn width(self, n_assets: usize) -> usize {
        match self {
            BasisFamily::One
            | BasisFamily::Payoff
            | BasisFamily::KoInd
            | BasisFamily::MaxPriceKo
            | BasisFamily::Max2PriceKo => 1,
            BasisFamily::Prices | BasisFamily::PricesKo => n_assets,
            BasisFamily::Prices2Ko => n_assets * (n_assets + 1) / 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::One => "one",
            BasisFamily::Prices => "prices",
            BasisFamily::Payoff => "payoff",
            BasisFamily::KoInd => "KOind",
            BasisFamily::PricesKo => "pricesKO",
            BasisFamily::MaxPriceKo => "maxpriceKO",
            BasisFamily::Max2PriceKo => "max2priceKO",
            BasisFamily::Prices2Ko => "prices2KO",
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let family = match s.trim().to_ascii_lowercase().as_str() {
            "one" => BasisFamily::One,
            "prices" => BasisFamily::Prices,
            "payoff" => BasisFamily::Payoff,
            "koind" => BasisFamily::KoInd,
            "pricesko" => BasisFamily::PricesKo,
            "maxpriceko" => BasisFamily::MaxPriceKo,
            "max2priceko" => BasisFamily::Max2PriceKo,
            "prices2ko" => BasisFamily::Prices2Ko,
            _ => return Err(Error::UnknownBasis(s.trim().to_string())),
        };
        Ok(family)
    }
}

/// One realized feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    One,
    Price(usize),
    Payoff,
    KoInd,
    PriceKo(usize),
    MaxPriceKo,
    Max2PriceKo,
    Price2Ko(usize, usize),
}

impl Column {
    fn label(self) -> String {
        match self {
            Column::One => "one".into(),
            Column::Price(i) => format!("prices_{}", i + 1),
            Column::Payoff => "payoff".into(),
            Column::KoInd => "KOind".into(),
            Column::PriceKo(i) => format!("pricesKO_{}", i + 1),
            Column::MaxPriceKo => "maxpriceKO".into(),
            Column::Max2PriceKo => "max2priceKO".into(),
            Column::Price2Ko(i, j) => format!("prices2KO_{}_{}", i + 1, j + 1),
        }
    }
}

/// Ordered list of basis families. Columns appear in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub families: Vec<BasisFamily>,
    #[serde(default)]
    pub standardize: bool,
}

impl BasisSpec {
    pub fn new(families: Vec<BasisFamily>) -> Self {
        BasisSpec { families, standardize: false }
    }

    /// Parses a comma-separated, case-insensitive family list such as
    /// `"pricesKO,KOind,payoff"`.
    pub fn parse(s: &str) -> Result<Self> {
        let families = s
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        if families.is_empty() {
            return Err(Error::InvalidArgument("empty basis specification".into()));
        }
        Ok(BasisSpec::new(families))
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub fn width(&self, n_assets: usize) -> usize {
        self.families.iter().map(|f| f.width(n_assets)).sum()
    }

    pub fn contains(&self, family: BasisFamily) -> bool {
        self.families.contains(&family)
    }

    /// Canonical comma-separated family names.
    pub fn label(&self) -> String {
        self.families.iter().map(|f| f.name()).collect::<Vec<_>>().join(",")
    }

    /// Identifier tying weights to the architecture they were fitted on.
    pub fn fingerprint(&self, n_assets: usize) -> String {
        format!("{};n={};std={}", self.label(), n_assets, u8::from(self.standardize))
    }

    fn columns(&self, n_assets: usize) -> Vec<Column> {
        let mut cols = Vec::with_capacity(self.width(n_assets));
        for family in &self.families {
            match family {
                BasisFamily::One => cols.push(Column::One),
                BasisFamily::Prices => cols.extend((0..n_assets).map(Column::Price)),
                BasisFamily::Payoff => cols.push(Column::Payoff),
                BasisFamily::KoInd => cols.push(Column::KoInd),
                BasisFamily::PricesKo => cols.extend((0..n_assets).map(Column::PriceKo)),
                BasisFamily::MaxPriceKo => cols.push(Column::MaxPriceKo),
                BasisFamily::Max2PriceKo => cols.push(Column::Max2PriceKo),
                BasisFamily::Prices2Ko => {
                    for i in 0..n_assets {
                        for j in i..n_assets {
                            cols.push(Column::Price2Ko(i, j));
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn column_names(&self, n_assets: usize) -> Vec<String> {
        self.columns(n_assets).into_iter().map(Column::label).collect()
    }

    /// Index of the (single) payoff column, if declared.
    pub fn payoff_column(&self, n_assets: usize) -> Option<usize> {
        self.columns(n_assets).iter().position(|c| *c == Column::Payoff)
    }

    pub fn one_column(&self, n_assets: usize) -> Option<usize> {
        self.columns(n_assets).iter().position(|c| *c == Column::One)
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Per-column affine map `z = (x - shift) / scale` fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub one_column: Option<usize>,
}

impl Standardizer {
    fn fit(values: &[f64], k: usize, one_column: Option<usize>) -> Self {
        let rows = (values.len() / k).max(1) as f64;
        let mut shift = vec![0.0; k];
        let mut scale = vec![1.0; k];
        for col in 0..k {
            if Some(col) == one_column {
                continue;
            }
            let column: Vec<f64> = values.iter().skip(col).step_by(k).cloned().collect();
            let mean = crate::reduce::pairwise_sum(&column) / rows;
            let sq: Vec<f64> = column.iter().map(|x| (x - mean) * (x - mean)).collect();
            let sd = (crate::reduce::pairwise_sum(&sq) / rows).sqrt();
            shift[col] = mean;
            scale[col] = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardizer { shift, scale, one_column }
    }

    fn apply(&self, values: &mut [f64]) {
        let k = self.shift.len();
        values.par_chunks_mut(k).for_each(|row| {
            for (col, x) in row.iter_mut().enumerate() {
                *x = (*x - self.shift[col]) / self.scale[col];
            }
        });
    }

    /// Maps weights on raw features to weights on standardized features
    /// with identical inner products. Needs a constant column to absorb the
    /// shift unless the shifted contribution is zero.
    pub fn to_standardized_weights(&self, raw: &[f64]) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = raw.iter().zip(&self.scale).map(|(b, s)| b * s).collect();
        let offset: f64 = raw.iter().zip(&self.shift).map(|(b, m)| b * m).sum();
        match self.one_column {
            Some(one) => {
                out[one] = raw[one] + offset;
                Some(out)
            }
            None if offset == 0.0 => Some(out),
            None => None,
        }
    }
}

/// Feature values indexed `[path][period][column]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub values: Vec<f64>,
    pub n_paths: usize,
    pub n_periods: usize,
    pub k: usize,
    /// max |value| over all entries.
    pub feature_bound_q: f64,
    pub payoff_column: Option<usize>,
    pub one_column: Option<usize>,
    pub column_names: Vec<String>,
    pub fingerprint: String,
    pub standardizer: Option<Standardizer>,
}

impl FeatureTensor {
    /// Wraps raw values, e.g. for synthetic problems.
    pub fn from_values(values: Vec<f64>, n_paths: usize, n_periods: usize, k: usize) -> Result<Self> {
        if values.len() != n_paths * n_periods * k {
            return Err(Error::Shape(format!(
                "expected {} feature values, got {}",
                n_paths * n_periods * k,
                values.len()
            )));
        }
        let feature_bound_q = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(FeatureTensor {
            values,
            n_paths,
            n_periods,
            k,
            feature_bound_q,
            payoff_column: None,
            one_column: None,
            column_names: (0..k).map(|i| format!("f{}", i + 1)).collect(),
            fingerprint: format!("custom;k={k}"),
            standardizer: None,
        })
    }

    #[inline]
    pub fn row(&self, path: usize, period: usize) -> &[f64] {
        let start = (path * self.n_periods + period) * self.k;
        &self.values[start..start + self.k]
    }

    /// Features of one period, `[path][column]`.
    pub fn stage_matrix(&self, period: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_paths * self.k);
        for w in 0..self.n_paths {
            out.extend_from_slice(self.row(w, period));
        }
        out
    }
}

/// Builds features; with `spec.standardize` the transform is fitted here.
pub fn build_features(
    trajectories: &TrajectorySet,
    rewards: &RewardSet,
    spec: &BasisSpec,
) -> Result<FeatureTensor> {
    build_features_with(trajectories, rewards, spec, None)
}

/// Builds features reusing a transform fitted on a training set.
pub fn build_features_with(
    trajectories: &TrajectorySet,
    rewards: &RewardSet,
    spec: &BasisSpec,
    standardizer: Option<&Standardizer>,
) -> Result<FeatureTensor> {
    let n = trajectories.n_assets;
    if rewards.n_paths != trajectories.n_paths || rewards.n_periods != trajectories.n_periods {
        return Err(Error::Shape(format!(
            "trajectories are {}x{} but rewards are {}x{}",
            trajectories.n_paths, trajectories.n_periods, rewards.n_paths, rewards.n_periods
        )));
    }
    if spec.families.is_empty() {
        return Err(Error::InvalidArgument("empty basis specification".into()));
    }
    if spec.contains(BasisFamily::Max2PriceKo) && n < 2 {
        return Err(Error::InvalidArgument(
            "max2priceKO needs at least two assets".into(),
        ));
    }
    let cols = spec.columns(n);
    let k = cols.len();
    let t_len = trajectories.n_periods;
    let mut values = vec![0.0; trajectories.n_paths * t_len * k];

    values
        .par_chunks_mut(t_len * k)
        .enumerate()
        .for_each(|(w, path_out)| {
            let mut ko_prices = vec![0.0; n];
            for t in 0..t_len {
                let prices = trajectories.prices_at(w, t);
                let y = if rewards.alive(w, t) { 1.0 } else { 0.0 };
                for (dst, p) in ko_prices.iter_mut().zip(prices) {
                    *dst = p * y;
                }
                let (top, second) = top_two(&ko_prices);
                let row = &mut path_out[t * k..(t + 1) * k];
                for (x, col) in row.iter_mut().zip(&cols) {
                    *x = match *col {
                        Column::One => 1.0,
                        Column::Price(i) => prices[i],
                        Column::Payoff => rewards.payoff(w, t),
                        Column::KoInd => y,
                        Column::PriceKo(i) => ko_prices[i],
                        Column::MaxPriceKo => top,
                        Column::Max2PriceKo => second,
                        Column::Price2Ko(i, j) => prices[i] * prices[j] * y,
                    };
                }
            }
        });

    let one_column = spec.one_column(n);
    let standardizer = match (standardizer, spec.standardize) {
        (Some(s), _) => Some(s.clone()),
        (None, true) => Some(Standardizer::fit(&values, k, one_column)),
        (None, false) => None,
    };
    if let Some(s) = &standardizer {
        if s.shift.len() != k {
            return Err(Error::Shape(format!(
                "standardizer has {} columns, basis has {k}",
                s.shift.len()
            )));
        }
        s.apply(&mut values);
    }
    let feature_bound_q = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    Ok(FeatureTensor {
        values,
        n_paths: trajectories.n_paths,
        n_periods: t_len,
        k,
        feature_bound_q,
        payoff_column: spec.payoff_column(n),
        one_column,
        column_names: spec.column_names(n),
        fingerprint: spec.fingerprint(n),
        standardizer,
    })
}

/// Largest and second-largest entries (the second is 0 for a single entry).
fn top_two(xs: &[f64]) -> (f64, f64) {
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &x in xs {
        if x > top {
            second = top;
            top = x;
        } else if x > second {
            second = x;
        }
    }
    (top, if second.is_finite() { second } else { 0.0 })
}
