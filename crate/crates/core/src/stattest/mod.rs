//! Welch two-sample t-test, chi-squared test of independence over 2 x V
//! count tables, and population mean / standard deviation.
//!
//! All p-values are two-sided (t) or upper-tail (chi-squared).

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("sample needs at least {min} values, got {got}")]
    SampleTooSmall { min: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("contingency table has no mass")]
    AllZero,
    #[error("fewer than 2 columns remain after collapsing sparse columns ({0})")]
    InsufficientColumns(usize),
    #[error("invalid statistic configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Degrees of freedom; 0 when `degenerate` is set.
    pub df: f64,
    pub p_value: f64,
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatConfig {
    pub alpha: f64,
    /// Columns whose smallest expected cell falls below this are pooled.
    pub min_expected: f64,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_expected: 5.0,
        }
    }
}

impl StatConfig {
    pub fn validate(&self) -> Result<(), StatError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StatError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.min_expected >= 0.0) {
            return Err(StatError::Config(format!(
                "min_expected must be non-negative, got {}",
                self.min_expected
            )));
        }
        Ok(())
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64), StatError> {
    if values.is_empty() {
        return Err(StatError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatError::SampleTooSmall {
                min: 2,
                got: s.len(),
            });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TestResult {
                statistic: 0.0,
                df: 0.0,
                p_value: 1.0,
                degenerate: true,
            }
        } else {
            TestResult {
                statistic: if ma > mb {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                df: 0.0,
                p_value: 0.0,
                degenerate: true,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        df,
        p_value: special::t_two_sided(t, df),
        degenerate: false,
    })
}

/// Chi-squared test of independence for two rows of counts.
///
/// Columns with no mass are dropped. Columns whose smallest expected cell is
/// below `config.min_expected` are summed into one residual column, which is
/// kept when non-empty.
pub fn chi_square_independence(
    rows: [&[u64]; 2],
    config: &StatConfig,
) -> Result<TestResult, StatError> {
    let width = rows[0].len().max(rows[1].len());
    let cell = |r: usize, c: usize| rows[r].get(c).copied().unwrap_or(0) as f64;
    let row_tot = [
        rows[0].iter().sum::<u64>() as f64,
        rows[1].iter().sum::<u64>() as f64,
    ];
    let total = row_tot[0] + row_tot[1];
    if total == 0.0 {
        return Err(StatError::AllZero);
    }
    let min_row = row_tot[0].min(row_tot[1]);

    let mut kept: Vec<[f64; 2]> = Vec::new();
    let mut residual = [0.0f64; 2];
    for c in 0..width {
        let col = [cell(0, c), cell(1, c)];
        let col_tot = col[0] + col[1];
        if col_tot == 0.0 {
            continue;
        }
        if min_row * col_tot / total < config.min_expected {
            residual[0] += col[0];
            residual[1] += col[1];
        } else {
            kept.push(col);
        }
    }
    if residual[0] + residual[1] > 0.0 {
        kept.push(residual);
    }
    if kept.len() < 2 || min_row == 0.0 {
        return Err(StatError::InsufficientColumns(kept.len()));
    }

    let statistic: f64 = kept
        .iter()
        .map(|col| {
            let col_tot = col[0] + col[1];
            (0..2)
                .map(|r| {
                    let e = row_tot[r] * col_tot / total;
                    let d = col[r] - e;
                    d * d / e
                })
                .sum::<f64>()
        })
        .sum();
    let df = (kept.len() - 1) as f64;
    Ok(TestResult {
        statistic,
        df,
        p_value: special::chi2_sf(statistic, df),
        degenerate: false,
    })
}
