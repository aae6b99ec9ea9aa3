//! Categorical datasets and the estimand-to-estimate stage: plug-in
//! evaluation on the empirical distribution and percentile bootstrap
//! intervals.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{eval_estimand, Binding, Estimand, ExprError, JointTable};

/// Token marking a missing cell in comma-separated input.
pub const MISSING_TOKEN: &str = "NA";

/// Largest dense joint table built from data.
pub const MAX_EMPIRICAL_CELLS: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("cannot read data: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Csv(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("data file is empty")]
    EmptyFile,
    #[error("duplicate column name `{0}`")]
    DuplicateHeader(String),
    #[error("invalid column name `{0}`")]
    InvalidHeader(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("value `{value}` is outside the domain of column `{column}`")]
    ValueOutsideDomain { column: String, value: String },
    #[error("column `{0}` has missing values; recoverability analysis is required")]
    MissingDataPresent(String),
    #[error("empirical table would need {0} cells")]
    TooManyCells(usize),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("{dropped} of {total} bootstrap resamples hit an empty stratum (limit is 10%)")]
    TooManyDegenerateResamples { dropped: usize, total: usize },
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    BootstrapTooSmall(usize),
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
}

/// Rectangular categorical data. Cells hold indices into their column's
/// domain; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    domains: Vec<Vec<String>>,
    rows: Vec<Vec<Option<usize>>>,
}

/// Sorts tokens numerically when every token parses as a number, otherwise
/// lexicographically.
pub fn sort_domain(values: &mut [String]) {
    let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    if numeric.as_ref().is_some_and(|n| n.iter().all(|x| x.is_finite())) {
        values.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        values.sort();
    }
}

impl Dataset {
    pub fn new(
        columns: Vec<String>,
        domains: Vec<Vec<String>>,
        rows: Vec<Vec<Option<usize>>>,
    ) -> Result<Self, EstimateError> {
        check_columns(&columns)?;
        if domains.len() != columns.len() {
            return Err(EstimateError::Csv("one domain per column required".into()));
        }
        if rows.is_empty() {
            return Err(EstimateError::EmptyFile);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(EstimateError::RaggedRow {
                    row: r + 1,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if *v >= domains[c].len() {
                        return Err(EstimateError::ValueOutsideDomain {
                            column: columns[c].clone(),
                            value: v.to_string(),
                        });
                    }
                }
            }
        }
        Ok(Dataset {
            columns,
            domains,
            rows,
        })
    }

    /// Builds a dataset from string cells, inferring sorted domains.
    pub fn from_records(columns: Vec<String>, records: Vec<Vec<Option<String>>>) -> Result<Self, EstimateError> {
        check_columns(&columns)?;
        if records.is_empty() {
            return Err(EstimateError::EmptyFile);
        }
        let mut domains: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); columns.len()];
        for (r, rec) in records.iter().enumerate() {
            if rec.len() != columns.len() {
                return Err(EstimateError::RaggedRow {
                    row: r + 1,
                    found: rec.len(),
                    expected: columns.len(),
                });
            }
            for (c, cell) in rec.iter().enumerate() {
                if let Some(v) = cell {
                    domains[c].insert(v);
                }
            }
        }
        let domains: Vec<Vec<String>> = domains
            .into_iter()
            .map(|d| {
                let mut d: Vec<String> = d.into_iter().map(str::to_string).collect();
                sort_domain(&mut d);
                d
            })
            .collect();
        let rows = records
            .iter()
            .map(|rec| {
                rec.iter()
                    .enumerate()
                    .map(|(c, cell)| {
                        cell.as_ref()
                            .map(|v| domains[c].iter().position(|d| d == v).unwrap())
                    })
                    .collect()
            })
            .collect();
        Ok(Dataset {
            columns,
            domains,
            rows,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn rows(&self) -> &[Vec<Option<usize>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize, EstimateError> {
        self.column_index(name)
            .ok_or_else(|| EstimateError::UnknownColumn(name.to_string()))
    }

    /// The string value of a cell, `None` when missing.
    pub fn value(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].map(|v| self.domains[col][v].as_str())
    }

    pub fn column_has_missing(&self, col: usize) -> bool {
        self.rows.iter().any(|r| r[col].is_none())
    }

    /// First column containing a missing cell.
    pub fn first_missing_column(&self) -> Option<&str> {
        (0..self.columns.len())
            .find(|&c| self.column_has_missing(c))
            .map(|c| self.columns[c].as_str())
    }

    /// Projection onto `names`, in that order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset, EstimateError> {
        let idx = names
            .iter()
            .map(|n| self.require_column(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            columns: names.iter().map(|s| s.to_string()).collect(),
            domains: idx.iter().map(|&i| self.domains[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
        })
    }

    /// Blanks out `column` wherever `indicator` takes `missing_value`, then
    /// drops the indicator column. Used to simulate a missingness mechanism.
    pub fn mask_by_indicator(&self, column: &str, indicator: &str, missing_value: &str) -> Result<Dataset, EstimateError> {
        let c = self.require_column(column)?;
        let r = self.require_column(indicator)?;
        let miss = self.domains[r].iter().position(|v| v == missing_value);
        let keep: Vec<usize> = (0..self.columns.len()).filter(|&i| i != r).collect();
        Ok(Dataset {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            domains: keep.iter().map(|&i| self.domains[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|row| {
                    keep.iter()
                        .map(|&i| if i == c && miss.is_some() && row[r] == miss { None } else { row[i] })
                        .collect()
                })
                .collect(),
        })
    }

    /// Comma-separated text with a header row and `NA` for missing cells.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in 0..self.rows.len() {
            let cells: Vec<&str> = (0..self.columns.len())
                .map(|c| self.value(row, c).unwrap_or(MISSING_TOKEN))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn joint_shape(&self) -> Result<usize, EstimateError> {
        let mut cells: usize = 1;
        for d in &self.domains {
            cells = cells
                .checked_mul(d.len().max(1))
                .filter(|&c| c <= MAX_EMPIRICAL_CELLS)
                .ok_or(EstimateError::TooManyCells(usize::MAX))?;
        }
        Ok(cells)
    }

    /// Dense cell index of each row; errors on missing cells.
    fn cell_codes(&self) -> Result<Vec<usize>, EstimateError> {
        if let Some(col) = self.first_missing_column() {
            return Err(EstimateError::MissingDataPresent(col.to_string()));
        }
        let mut strides = vec![1usize; self.columns.len()];
        for i in (0..self.columns.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.domains[i + 1].len();
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.iter().zip(&strides).map(|(v, s)| v.unwrap() * s).sum())
            .collect())
    }

    fn table_from_counts(&self, counts: &[f64]) -> Result<JointTable, EstimateError> {
        Ok(JointTable::from_weights(self.columns.clone(), self.domains.clone(), counts.to_vec())?)
    }
}

fn check_columns(columns: &[String]) -> Result<(), EstimateError> {
    let mut seen = BTreeSet::new();
    for c in columns {
        if !crate::graph::is_valid_name(c) {
            return Err(EstimateError::InvalidHeader(c.clone()));
        }
        if !seen.insert(c) {
            return Err(EstimateError::DuplicateHeader(c.clone()));
        }
    }
    Ok(())
}

/// Reads comma-separated data from a file.
pub fn load_table(path: impl AsRef<Path>) -> Result<Dataset, EstimateError> {
    let file = std::fs::File::open(path)?;
    read_table(file)
}

/// Reads comma-separated data: a header of variable names, then one row per
/// sample, with `NA` marking missing cells.
pub fn read_table<R: Read>(reader: R) -> Result<Dataset, EstimateError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(EstimateError::EmptyFile),
        Some(r) => r.map_err(|e| EstimateError::Csv(e.to_string()))?,
    };
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    if columns.iter().all(|c| c.is_empty()) {
        return Err(EstimateError::EmptyFile);
    }
    check_columns(&columns)?;
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| EstimateError::Csv(e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != columns.len() {
            return Err(EstimateError::RaggedRow {
                row: line,
                found: rec.len(),
                expected: columns.len(),
            });
        }
        rows.push(
            rec.iter()
                .map(|cell| (cell != MISSING_TOKEN).then(|| cell.to_string()))
                .collect(),
        );
    }
    Dataset::from_records(columns, rows)
}

/// Relative frequencies of complete rows.
pub fn empirical_joint(d: &Dataset) -> Result<JointTable, EstimateError> {
    let cells = d.joint_shape()?;
    let codes = d.cell_codes()?;
    let mut counts = vec![0.0; cells];
    for c in codes {
        counts[c] += 1.0;
    }
    d.table_from_counts(&counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub n: usize,
    pub interval: Option<Interval>,
    /// Bootstrap resamples discarded because of an empty stratum.
    pub dropped_resamples: usize,
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} (n = {})", self.value, self.n)?;
        if let Some(i) = self.interval {
            write!(f, ", {:.0}% interval [{:.6}, {:.6}]", i.level * 100.0, i.low, i.high)?;
        }
        Ok(())
    }
}

/// Evaluates the estimand on the empirical distribution of `d`.
pub fn plug_in(e: &Estimand, d: &Dataset, binding: &Binding) -> Result<Estimate, EstimateError> {
    let joint = empirical_joint(d)?;
    let value = eval_estimand(e, &joint, binding)?;
    Ok(Estimate {
        value,
        n: d.n_rows(),
        interval: None,
        dropped_resamples: 0,
    })
}

/// Percentile bootstrap over `resamples` row resamples. Replicate `b` draws
/// from its own ChaCha stream `b` under `seed`, so the result does not
/// depend on scheduling.
pub fn bootstrap_interval(
    e: &Estimand,
    d: &Dataset,
    binding: &Binding,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Estimate, EstimateError> {
    if resamples < 100 {
        return Err(EstimateError::BootstrapTooSmall(resamples));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimateError::InvalidLevel(level));
    }
    let point = plug_in(e, d, binding)?;
    let cells = d.joint_shape()?;
    let codes = d.cell_codes()?;
    let n = codes.len();
    let outcomes: Vec<Result<f64, EstimateError>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut counts = vec![0.0; cells];
            for _ in 0..n {
                counts[codes[rng.gen_range(0..n)]] += 1.0;
            }
            let joint = d.table_from_counts(&counts)?;
            Ok(eval_estimand(e, &joint, binding)?)
        })
        .collect();
    let mut values = Vec::with_capacity(resamples);
    let mut dropped = 0;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(EstimateError::Expr(ExprError::ConditioningOnZero { .. })) => dropped += 1,
            Err(other) => return Err(other),
        }
    }
    if dropped * 10 > resamples {
        return Err(EstimateError::TooManyDegenerateResamples {
            dropped,
            total: resamples,
        });
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let alpha = (1.0 - level) / 2.0;
    let low = quantile(&values, alpha).min(point.value);
    let high = quantile(&values, 1.0 - alpha).max(point.value);
    Ok(Estimate {
        interval: Some(Interval { low, high, level }),
        dropped_resamples: dropped,
        ..point
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
