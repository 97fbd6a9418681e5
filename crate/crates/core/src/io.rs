//! File formats: a binary trajectory cache and CSV weight files.
//!
//! Weight files carry `#`-prefixed metadata lines (basis fingerprint,
//! optional standardization) followed by a header `t,<column names>` and one
//! row per period. Floats are written in shortest round-trip form, so a
//! write/read cycle is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::basis::Standardizer;
use crate::error::{Error, Result};
use crate::lsm::LsmWeights;
use crate::policy::WeightMatrix;
use crate::process::TrajectorySet;

const TRAJECTORY_MAGIC: &[u8; 8] = b"RPOTRAJ1";

pub fn write_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(TRAJECTORY_MAGIC)?;
    for v in [set.n_paths as u64, set.n_periods as u64, set.n_assets as u64, set.seed, set.first_path] {
        out.write_all(&v.to_le_bytes())?;
    }
    for p in &set.prices {
        out.write_all(&p.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<TrajectorySet> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(Error::Format(format!("{} is not a trajectory file", path.display())));
    }
    let mut word = [0u8; 8];
    let mut header = [0u64; 5];
    for h in &mut header {
        input.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let [n_paths, n_periods, n_assets, seed, first_path] = header;
    let len = n_paths
        .checked_mul(n_periods)
        .and_then(|x| x.checked_mul(n_assets))
        .ok_or_else(|| Error::Format("trajectory header overflows".into()))? as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!("expected {} price bytes, found {}", len * 8, bytes.len())));
    }
    let prices = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(TrajectorySet {
        prices,
        n_paths: n_paths as usize,
        n_periods: n_periods as usize,
        n_assets: n_assets as usize,
        seed,
        first_path,
    })
}

/// Policy weights as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyWeights {
    /// Linear stopping rule, one row per period.
    Linear(WeightMatrix),
    /// Regression coefficients, one row per period except the last.
    Lsm(LsmWeights),
}

impl PolicyWeights {
    pub fn fingerprint(&self) -> &str {
        match self {
            PolicyWeights::Linear(w) => &w.basis_fingerprint,
            PolicyWeights::Lsm(w) => &w.basis_fingerprint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub weights: PolicyWeights,
    pub column_names: Vec<String>,
    /// Transform the weights expect their features to have gone through.
    pub standardizer: Option<Standardizer>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    s.split(';')
        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {v:?}: {e}"))))
        .collect()
}

pub fn write_weight_file(path: &Path, file: &WeightFile) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let (kind, n_periods, k, rows, fingerprint) = match &file.weights {
        PolicyWeights::Linear(w) => ("linear", w.n_periods, w.k, w.n_periods, &w.basis_fingerprint),
        PolicyWeights::Lsm(w) => ("lsm", w.n_periods, w.k, w.n_periods - 1, &w.basis_fingerprint),
    };
    if file.column_names.len() != k {
        return Err(Error::Shape(format!("{} column names for {k} columns", file.column_names.len())));
    }
    writeln!(out, "# fingerprint={fingerprint}")?;
    writeln!(out, "# kind={kind}")?;
    writeln!(out, "# n_periods={n_periods}")?;
    if let Some(s) = &file.standardizer {
        writeln!(out, "# shift={}", join(&s.shift))?;
        writeln!(out, "# scale={}", join(&s.scale))?;
        if let Some(one) = s.one_column {
            writeln!(out, "# one_column={one}")?;
        }
    }
    let mut csv = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(file.column_names.iter().cloned());
    csv.write_record(&header)?;
    for period in 0..rows {
        let row = match &file.weights {
            PolicyWeights::Linear(w) => w.row(period),
            PolicyWeights::Lsm(w) => w.row(period),
        };
        let mut record = vec![(period + 1).to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_weight_file(path: &Path) -> Result<WeightFile> {
    let text = std::fs::read_to_string(path)?;
    let mut meta = std::collections::HashMap::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.trim().split_once('=') {
                meta.insert(key.trim().to_string(), value.trim().to_string());
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let get = |key: &str| meta.get(key).ok_or_else(|| Error::Format(format!("weight file lacks `{key}`")));
    let fingerprint = get("fingerprint")?.clone();
    let n_periods: usize = get("n_periods")?
        .parse()
        .map_err(|_| Error::Format("bad n_periods".into()))?;

    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("t") {
        return Err(Error::Format("weight file header must start with `t`".into()));
    }
    let column_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let k = column_names.len();
    let mut weights = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != k + 1 {
            return Err(Error::Format(format!("row {} has {} fields", rows + 1, record.len())));
        }
        for field in record.iter().skip(1) {
            weights.push(field.parse::<f64>().map_err(|e| Error::Format(format!("bad weight {field:?}: {e}")))?);
        }
        rows += 1;
    }

    let weights = match get("kind")?.as_str() {
        "linear" if rows == n_periods => PolicyWeights::Linear(WeightMatrix { weights, n_periods, k, basis_fingerprint: fingerprint }),
        "lsm" if rows + 1 == n_periods => PolicyWeights::Lsm(LsmWeights { weights, n_periods, k, basis_fingerprint: fingerprint }),
        other => return Err(Error::Format(format!("weight file of kind {other:?} has {rows} rows for {n_periods} periods"))),
    };
    let standardizer = match (meta.get("shift"), meta.get("scale")) {
        (Some(shift), Some(scale)) => {
            let one_column = match meta.get("one_column") {
                Some(v) => Some(v.parse().map_err(|_| Error::Format("bad one_column".into()))?),
                None => None,
            };
            let s = Standardizer { shift: split(shift)?, scale: split(scale)?, one_column };
            if s.shift.len() != k || s.scale.len() != k {
                return Err(Error::Format("standardizer width differs from weights".into()));
            }
            Some(s)
        }
        (None, None) => None,
        _ => return Err(Error::Format("standardizer needs both shift and scale".into())),
    };
    Ok(WeightFile { weights, column_names, standardizer })
}
