//! Grouped datasets: CSV ingestion and the two built-in generators.

use std::io::Read;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the pseudo-random generator used by the synthetic generator and
/// seeded initial points, recorded in reports so runs can be replicated.
pub const PRNG_NAME: &str = "chacha12/box-muller";

/// One observation: input vector and scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

/// Samples partitioned into non-empty groups of a common input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<Vec<Sample>>,
    dim: usize,
}

impl GroupedDataset {
    /// Validates and wraps a partition. Requires at least one group, no empty
    /// groups, a consistent input dimension, and finite entries.
    pub fn new(groups: Vec<Vec<Sample>>) -> Result<Self> {
        if groups.is_empty() || groups.iter().all(|g| g.is_empty()) {
            return Err(Error::EmptyData);
        }
        if let Some(idx) = groups.iter().position(|g| g.is_empty()) {
            return Err(Error::EmptyGroup { index: idx });
        }
        let dim = groups[0][0].x.len();
        for group in &groups {
            for s in group {
                if s.x.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: s.x.len(),
                    });
                }
                if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(
                        "dataset contains a non-finite value".into(),
                    ));
                }
            }
        }
        Ok(Self { groups, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of groups N.
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, j: usize) -> &[Sample] {
        &self.groups[j]
    }

    pub fn groups(&self) -> &[Vec<Sample>] {
        &self.groups
    }

    pub fn total_samples(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// All samples in group order.
    pub fn iter_samples(&self) -> impl Iterator<Item = &Sample> {
        self.groups.iter().flatten()
    }

    /// (min, max) of input coordinate `coord` over all samples.
    pub fn x_range(&self, coord: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in self.iter_samples() {
            lo = lo.min(s.x[coord]);
            hi = hi.max(s.x[coord]);
        }
        (lo, hi)
    }

    /// Writes the dataset as CSV with header `group,y,x1..xd`. Group ids are
    /// the 1-based group indices, so a save/load round trip reproduces the
    /// partition exactly.
    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["group".to_string(), "y".to_string()];
        for i in 1..=self.dim {
            header.push(format!("x{i}"));
        }
        w.write_record(&header)?;
        for (j, group) in self.groups.iter().enumerate() {
            for s in group {
                let mut rec = vec![(j + 1).to_string(), fmt_f64(s.y)];
                rec.extend(s.x.iter().map(|v| fmt_f64(*v)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// The standard formatter already prints the shortest round-trip decimal.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Column naming for [`load_csv`]. The default expects `group` and `y`
/// columns and treats every remaining column, in file order, as an input
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub group_column: String,
    pub y_column: String,
    /// Explicit input columns; empty means "all remaining columns".
    pub x_columns: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            group_column: "group".into(),
            y_column: "y".into(),
            x_columns: Vec::new(),
        }
    }
}

/// Reads a grouped dataset from CSV. Groups are keyed by the raw string in
/// the group column and ordered by first appearance; samples keep file order.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<GroupedDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, schema)
}

/// Same as [`load_csv`] but from any reader.
pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<GroupedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() => h.clone(),
        _ => return Err(Error::EmptyData),
    };
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptyData);
    }

    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let group_idx = col(&schema.group_column)?;
    let y_idx = col(&schema.y_column)?;
    let x_idx: Vec<usize> = if schema.x_columns.is_empty() {
        (0..headers.len())
            .filter(|&i| i != group_idx && i != y_idx)
            .collect()
    } else {
        schema
            .x_columns
            .iter()
            .map(|n| col(n))
            .collect::<Result<_>>()?
    };

    let mut order: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<Sample>> = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let row = row_no + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let parse = |idx: usize| -> Result<f64> {
            let cell = record.get(idx).ok_or_else(|| Error::Parse {
                row,
                message: format!("missing field {idx}"),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("`{cell}` is not finite"),
                });
            }
            Ok(v)
        };
        let y = parse(y_idx)?;
        let x: Vec<f64> = x_idx.iter().map(|&i| parse(i)).collect::<Result<_>>()?;
        let gid = record.get(group_idx).unwrap_or("").to_string();
        let slot = match order.iter().position(|g| *g == gid) {
            Some(i) => i,
            None => {
                order.push(gid);
                groups.push(Vec::new());
                groups.len() - 1
            }
        };
        groups[slot].push(Sample::new(x, y));
    }
    GroupedDataset::new(groups)
}

/// The 1517-sample linear-regression benchmark: three mass points repeated
/// 500 times each, then 17 scattered pairs, every sample its own group.
pub fn generate_example41() -> GroupedDataset {
    const SCATTER: [(f64, f64); 17] = [
        (1.23, 3.01),
        (0.63, 2.89),
        (1.64, 4.54),
        (0.98, 3.32),
        (1.92, 5.0),
        (1.26, 3.96),
        (1.77, 3.92),
        (1.1, 2.8),
        (1.22, 2.84),
        (1.48, 4.52),
        (0.71, 3.17),
        (0.77, 2.59),
        (1.89, 5.1),
        (1.31, 3.17),
        (1.31, 2.91),
        (1.63, 4.02),
        (0.56, 1.79),
    ];
    let mut groups = Vec::with_capacity(1517);
    let mut push = |x: f64, y: f64| groups.push(vec![Sample::new(vec![x], y)]);
    for _ in 0..500 {
        push(0.15, 1.48);
    }
    for _ in 0..500 {
        push(0.43, 1.45);
    }
    for _ in 0..500 {
        push(0.04, 1.59);
    }
    for (x, y) in SCATTER {
        push(x, y);
    }
    GroupedDataset::new(groups).expect("literal dataset is valid")
}

/// True coefficients behind [`generate_example41`], used by the experiment
/// metrics.
pub const EXAMPLE41_TRUE_PARAMS: [f64; 2] = [1.75, 1.25];

/// Configuration for [`generate_synthetic_unbalanced`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub groups: usize,
    pub group_size: usize,
    pub positive_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 5,
            groups: 20,
            group_size: 1000,
            positive_fraction: 0.05,
        }
    }
}

/// Two Gaussian class-conditional clusters in `R^dim` (class 0 centred at
/// `-1`, class 1 at `+1`, unit covariance), arranged so that all
/// `floor(groups * group_size * positive_fraction)` positive samples sit at
/// the front of group 1 and every other group is all-negative. Deterministic
/// in `seed`.
pub fn generate_synthetic_unbalanced(seed: u64, cfg: &SyntheticConfig) -> Result<GroupedDataset> {
    if cfg.groups < 2 || cfg.group_size < 1 {
        return Err(Error::Config(format!(
            "need at least 2 groups of at least 1 sample, got {}x{}",
            cfg.groups, cfg.group_size
        )));
    }
    if !(cfg.positive_fraction > 0.0 && cfg.positive_fraction < 1.0) {
        return Err(Error::Config(format!(
            "positive_fraction must lie in (0,1), got {}",
            cfg.positive_fraction
        )));
    }
    let total = cfg.groups * cfg.group_size;
    let positives = (total as f64 * cfg.positive_fraction).floor() as usize;
    if positives < 1 {
        return Err(Error::Config(format!(
            "positive_fraction {} yields no positive samples for {} total",
            cfg.positive_fraction, total
        )));
    }
    if positives > cfg.group_size {
        return Err(Error::Config(format!(
            "{positives} positives do not fit into one group of {}",
            cfg.group_size
        )));
    }

    let mut rng = Prng::seeded(seed);
    let mut groups = Vec::with_capacity(cfg.groups);
    for j in 0..cfg.groups {
        let mut group = Vec::with_capacity(cfg.group_size);
        for l in 0..cfg.group_size {
            let positive = j == 0 && l < positives;
            let mean = if positive { 1.0 } else { -1.0 };
            let x: Vec<f64> = (0..cfg.dim).map(|_| mean + rng.standard_normal()).collect();
            group.push(Sample::new(x, if positive { 1.0 } else { 0.0 }));
        }
        groups.push(group);
    }
    GroupedDataset::new(groups)
}

/// Seeded ChaCha12 stream with a Box-Muller normal transform. Both pieces are
/// fixed algorithms, so streams are identical across platforms and releases.
pub struct Prng {
    rng: ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform draw in the half-open interval (0, 1].
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller; generates pairs and caches the spare.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open01();
        let u2 = self.uniform_open01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
