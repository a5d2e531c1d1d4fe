//! Exact evaluation of the storage / repair-bandwidth trade-off points and
//! the secrecy-capacity comparison tables. All arithmetic is over arbitrary
//! precision rationals; decimals exist only in the CSV rendering.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("k must be at least {min}, got {k}")]
    KTooSmall { k: usize, min: usize },
    #[error("k = {k} must not exceed d = {d}")]
    KExceedsD { k: usize, d: usize },
    #[error("too many taps: l1 + l2 = {total} must stay below k = {k}")]
    TooManyTaps { total: usize, k: usize },
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rational_pow(base: &BigRational, exp: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// One point on the storage/bandwidth trade-off: per-node storage alpha and
/// repair bandwidth gamma = d * beta, in symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeoffPoint {
    pub alpha: BigRational,
    pub gamma: BigRational,
}

/// The minimum-storage extreme: (B/k, (B/k) * d / (d - k + 1)).
pub fn msr_point(b: usize, k: usize, d: usize) -> Result<TradeoffPoint, AnalysisError> {
    if k < 1 {
        return Err(AnalysisError::KTooSmall { k, min: 1 });
    }
    if k > d {
        return Err(AnalysisError::KExceedsD { k, d });
    }
    let alpha = ratio(b, k);
    let gamma = &alpha * ratio(d, d - k + 1);
    Ok(TradeoffPoint { alpha, gamma })
}

/// The minimum-bandwidth extreme: both coordinates (B/k) * 2d / (2d - k + 1).
pub fn mbr_point(b: usize, k: usize, d: usize) -> Result<TradeoffPoint, AnalysisError> {
    if k < 1 {
        return Err(AnalysisError::KTooSmall { k, min: 1 });
    }
    if k > d {
        return Err(AnalysisError::KExceedsD { k, d });
    }
    let both = ratio(b, k) * ratio(2 * d, 2 * d - k + 1);
    Ok(TradeoffPoint { alpha: both.clone(), gamma: both })
}

/// Repair bandwidth of this crate's code family: d * beta = 2k - 1 symbols.
pub fn ia_repair_bandwidth(k: usize) -> Result<usize, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::KTooSmall { k, min: 2 });
    }
    Ok(2 * k - 1)
}

/// Secrecy upper bound for minimum-storage codes with uncoded repair
/// downloads: (k - l1 - l2) * (1 - 1/(d - k + 1))^l2 * alpha, exact.
pub fn goparaju_bound(
    k: usize,
    d: usize,
    alpha: usize,
    l1: usize,
    l2: usize,
) -> Result<BigRational, AnalysisError> {
    if k > d {
        return Err(AnalysisError::KExceedsD { k, d });
    }
    if l1 + l2 >= k {
        return Err(AnalysisError::TooManyTaps { total: l1 + l2, k });
    }
    let base = BigRational::one() - ratio(1, d - k + 1);
    Ok(ratio(k - l1 - l2, 1) * rational_pow(&base, l2) * ratio(alpha, 1))
}

/// One table cell: either an exact count or an exact rational.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cell {
    Count(u64),
    Exact(BigRational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonRow {
    /// The independent variable (k for bandwidth tables, l2 for secrecy).
    pub x: u64,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonTable {
    pub x_label: String,
    pub series_labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Renders a non-negative rational with exactly six decimal places,
/// rounding half away from zero.
pub fn decimal_6(r: &BigRational) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = r.abs();
    let million = BigInt::from(1_000_000u64);
    // floor((2 * n * 10^6 + d) / (2 * d)) rounds n/d * 10^6 half up
    let scaled = (abs.numer() * &million * 2 + abs.denom()) / (abs.denom() * 2);
    let int_part = &scaled / &million;
    let frac_part = &scaled % &million;
    format!("{sign}{int_part}.{frac_part:06}")
}

fn render_exact(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl ComparisonTable {
    /// CSV with one column per count series and two (exact, decimal) per
    /// rational series.
    pub fn to_csv(&self) -> String {
        let rational_series: Vec<bool> = (0..self.series_labels.len())
            .map(|i| self.rows.iter().any(|row| matches!(row.cells[i], Cell::Exact(_))))
            .collect();
        let mut out = String::new();
        out.push_str(&self.x_label);
        for (label, &is_rational) in self.series_labels.iter().zip(&rational_series) {
            out.push(',');
            out.push_str(label);
            if is_rational {
                out.push(',');
                out.push_str(label);
                out.push_str("_decimal");
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.x.to_string());
            for (cell, &is_rational) in row.cells.iter().zip(&rational_series) {
                out.push(',');
                match cell {
                    Cell::Count(v) => {
                        out.push_str(&v.to_string());
                        if is_rational {
                            out.push(',');
                            out.push_str(&decimal_6(&ratio(*v as usize, 1)));
                        }
                    }
                    Cell::Exact(r) => {
                        out.push_str(&render_exact(r));
                        out.push(',');
                        out.push_str(&decimal_6(r));
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Repair bandwidth comparison for k = 2..=k_max at message length B = k^2:
/// generic minimum-storage repair at d = k (fewest contacts, worst
/// bandwidth) and d = 2k - 1 (most contacts, best), against this code's
/// 2k - 1. Every value is an integer at these parameters.
pub fn bandwidth_table(k_max: usize) -> Result<ComparisonTable, AnalysisError> {
    if k_max < 2 {
        return Err(AnalysisError::KTooSmall { k: k_max, min: 2 });
    }
    let mut rows = Vec::new();
    for k in 2..=k_max {
        let b = k * k;
        let worst = msr_point(b, k, k)?.gamma;
        let best = msr_point(b, k, 2 * k - 1)?.gamma;
        debug_assert!(worst.denom().is_one() && best.denom().is_one());
        rows.push(ComparisonRow {
            x: k as u64,
            cells: vec![
                Cell::Count(worst.numer().to_u64().expect("small integer")),
                Cell::Count(best.numer().to_u64().expect("small integer")),
                Cell::Count(ia_repair_bandwidth(k)? as u64),
            ],
        });
    }
    Ok(ComparisonTable {
        x_label: "k".into(),
        series_labels: vec![
            "msr_gamma_d_k".into(),
            "msr_gamma_d_2k_minus_1".into(),
            "ia_gamma".into(),
        ],
        rows,
    })
}

/// Achieved secrecy capacity against the uncoded-repair upper bound, for
/// fixed k and l1, swept over l2 = 1..k-l1-1. The achieved value never
/// exceeds the bound; the table asserts it row by row.
pub fn secrecy_table(k: usize, l1: usize) -> Result<ComparisonTable, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::KTooSmall { k, min: 2 });
    }
    if l1 >= k {
        return Err(AnalysisError::TooManyTaps { total: l1, k });
    }
    let (alpha, d) = (k, 2 * k - 1);
    let mut rows = Vec::new();
    for l2 in 1..(k - l1) {
        let achieved = (k - l1 - l2) * (alpha - l2);
        let bound = goparaju_bound(k, d, alpha, l1, l2)?;
        assert!(
            ratio(achieved, 1) <= bound,
            "achieved capacity exceeds the upper bound at k={k} l1={l1} l2={l2}"
        );
        rows.push(ComparisonRow {
            x: l2 as u64,
            cells: vec![Cell::Count(achieved as u64), Cell::Exact(bound)],
        });
    }
    Ok(ComparisonTable {
        x_label: "l2".into(),
        series_labels: vec!["achieved_capacity".into(), "uncoded_repair_bound".into()],
        rows,
    })
}
