//! Fit indices: each conditional independence the graph implies is tested
//! against the data with a stratified likelihood-ratio (G²) test.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::estimate::{Dataset, EstimateError};
use crate::graph::{Admg, CiStatement};

/// Strata with fewer rows than this are left out of the statistic.
pub const MIN_STRATUM: usize = 5;

/// Outcome of one G² test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Observed strata that were too small to contribute.
    pub skipped_strata: usize,
    /// Rows in the skipped strata.
    pub skipped_rows: usize,
}

/// G² test of `left _||_ right | given` on complete rows of `d`. Degrees of
/// freedom are `(|L|-1)(|R|-1)` per contributing stratum with the full
/// domain sizes.
pub fn g_test(d: &Dataset, left: &[&str], right: &[&str], given: &[&str]) -> Result<GTest, EstimateError> {
    let cols = |names: &[&str]| -> Result<Vec<usize>, EstimateError> {
        names.iter().map(|n| d.require_column(n)).collect()
    };
    let (lc, rc, gc) = (cols(left)?, cols(right)?, cols(given)?);
    for &c in lc.iter().chain(&rc).chain(&gc) {
        if d.column_has_missing(c) {
            return Err(EstimateError::MissingDataPresent(d.columns()[c].clone()));
        }
    }
    let size = |cs: &[usize]| cs.iter().map(|&c| d.domains()[c].len()).product::<usize>();
    let (nl, nr) = (size(&lc), size(&rc));
    let code = |row: &[Option<usize>], cs: &[usize]| {
        cs.iter()
            .fold(0usize, |acc, &c| acc * d.domains()[c].len() + row[c].expect("checked complete"))
    };
    let mut strata: HashMap<usize, Vec<f64>> = HashMap::new();
    for row in d.rows() {
        let cell = strata.entry(code(row, &gc)).or_insert_with(|| vec![0.0; nl * nr]);
        cell[code(row, &lc) * nr + code(row, &rc)] += 1.0;
    }
    let mut statistic = 0.0;
    let mut df = 0;
    let mut skipped_strata = 0;
    let mut skipped_rows = 0;
    for counts in strata.values() {
        let n: f64 = counts.iter().sum();
        if n < MIN_STRATUM as f64 {
            skipped_strata += 1;
            skipped_rows += n as usize;
            continue;
        }
        let row_tot: Vec<f64> = (0..nl).map(|l| counts[l * nr..(l + 1) * nr].iter().sum()).collect();
        let col_tot: Vec<f64> = (0..nr).map(|r| (0..nl).map(|l| counts[l * nr + r]).sum()).collect();
        for l in 0..nl {
            for r in 0..nr {
                let o = counts[l * nr + r];
                if o > 0.0 {
                    statistic += 2.0 * o * (o * n / (row_tot[l] * col_tot[r])).ln();
                }
            }
        }
        df += (nl - 1) * (nr - 1);
    }
    let statistic = statistic.max(0.0);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
            .clamp(0.0, 1.0)
    };
    Ok(GTest {
        statistic,
        df,
        p_value,
        skipped_strata,
        skipped_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitEntry {
    pub statement: CiStatement,
    pub test: GTest,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub entries: Vec<FitEntry>,
    pub alpha: f64,
    /// Per-test threshold after any multiple-comparison correction.
    pub threshold: f64,
    pub bonferroni: bool,
}

impl FitReport {
    /// True when the graph implies nothing testable.
    pub fn is_null(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rejections(&self) -> usize {
        self.entries.iter().filter(|e| e.rejected).count()
    }

    /// Coverage warnings for tests that dropped small strata.
    pub fn warnings(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.test.skipped_strata > 0)
            .map(|e| {
                format!(
                    "warning: {}: {} strata ({} rows) with fewer than {MIN_STRATUM} observations left out",
                    e.statement, e.test.skipped_strata, e.test.skipped_rows
                )
            })
            .collect()
    }

    /// Machine-readable lines `CI<TAB>statistic<TAB>df<TAB>p`, or `NULL`.
    pub fn porcelain(&self) -> String {
        if self.is_null() {
            return "NULL\n".to_string();
        }
        self.entries
            .iter()
            .map(|e| format!("{}\t{:.6}\t{}\t{:.6}\n", e.statement, e.test.statistic, e.test.df, e.test.p_value))
            .collect()
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            return writeln!(f, "NULL");
        }
        let statements: Vec<String> = self.entries.iter().map(|e| e.statement.to_string()).collect();
        let width = statements.iter().map(|s| s.len()).max().unwrap_or(0).max(9);
        writeln!(f, "{:<width$}  {:>12}  {:>4}  {:>10}  verdict", "statement", "G2", "df", "p")?;
        for (s, e) in statements.iter().zip(&self.entries) {
            writeln!(
                f,
                "{:<width$}  {:>12.4}  {:>4}  {:>10.6}  {}",
                s,
                e.test.statistic,
                e.test.df,
                e.test.p_value,
                if e.rejected { "rejected" } else { "consistent" }
            )?;
        }
        Ok(())
    }
}

fn names(set: &BTreeSet<String>) -> Vec<&str> {
    set.iter().map(|x| x.as_str()).collect()
}

/// Tests every testable implication of `g` on `d` at level `alpha`,
/// optionally with a Bonferroni correction. Entries follow
/// [`Admg::testable_implications`].
pub fn fit_indices(g: &Admg, d: &Dataset, alpha: f64, bonferroni: bool) -> Result<FitReport, EstimateError> {
    for v in g.names() {
        let c = d.require_column(v)?;
        if d.column_has_missing(c) {
            return Err(EstimateError::MissingDataPresent(v.clone()));
        }
    }
    let statements = g.testable_implications();
    let threshold = if bonferroni && !statements.is_empty() {
        alpha / statements.len() as f64
    } else {
        alpha
    };
    let entries = statements
        .into_par_iter()
        .map(|s| {
            let test = g_test(d, &names(&s.left), &names(&s.right), &names(&s.given))?;
            Ok(FitEntry {
                rejected: test.p_value < threshold,
                statement: s,
                test,
            })
        })
        .collect::<Result<Vec<_>, EstimateError>>()?;
    Ok(FitReport {
        entries,
        alpha,
        threshold,
        bonferroni,
    })
}
