//! Paired Wilcoxon signed-rank comparison of two models across tasks.
//!
//! Per task the difference is `(a - b) / mean(a, b)`, negated for metrics
//! where lower is better, so a positive difference always favours `a`.
//! Zero differences are dropped, ties in |d| share their average rank, and
//! the statistic is `W = min(W+, W-)`. The two-sided p-value is exact (full
//! null distribution) for up to 25 nonzero pairs and uses the normal
//! approximation with tie and continuity corrections above that.

use crate::evalharness::metrics::average_ranks;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const EXACT_LIMIT: usize = 25;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScore {
    pub task: String,
    pub a: f64,
    pub b: f64,
    pub lower_is_better: bool,
    /// Winner of an exact tie, when known from outside the printed values.
    pub tie_winner: Option<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
    /// No nonzero differences.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub n_pairs: usize,
    /// Pairs with a nonzero difference.
    pub n_used: usize,
    pub wins_a: usize,
    pub wins_b: usize,
    /// Zero differences not resolved by a tie winner.
    pub ties: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub differences: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WilcoxonError {
    #[error("need at least {MIN_PAIRS} pairs, got {0}")]
    TooFew(usize),
    #[error("input lengths differ")]
    LengthMismatch,
}

/// Mean-normalized difference, positive when `a` is better.
pub fn normalized_difference(a: f64, b: f64, lower_is_better: bool) -> f64 {
    if a == b {
        return 0.0;
    }
    let mean = (a + b) / 2.0;
    let d = if mean == 0.0 { a - b } else { (a - b) / mean.abs() };
    if lower_is_better {
        -d
    } else {
        d
    }
}

/// Signed-rank statistics and two-sided p for nonzero differences.
pub fn signed_rank_test(differences: &[f64]) -> (f64, f64, f64, PValueMethod) {
    let d: Vec<f64> = differences.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 0.0, 1.0, PValueMethod::Degenerate);
    }
    let ranks = average_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);
    if n <= EXACT_LIMIT {
        (w_plus, w_minus, exact_p(&ranks, w), PValueMethod::Exact)
    } else {
        (w_plus, w_minus, normal_p(&ranks, w_plus), PValueMethod::Normal)
    }
}

/// P(min(W+, W-) <= w) under random signs. Ranks are halves at worst, so the
/// distribution is tabulated over doubled ranks.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w2 = (w * 2.0).round() as usize;
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| s.min(total - s) <= w2)
        .map(|(_, c)| c)
        .sum();
    let all = 2f64.powi(ranks.len() as i32);
    (hits / all).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided signed-rank test of `a` against `b`.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    lower_is_better: &[bool],
) -> Result<ComparisonResult, WilcoxonError> {
    if a.len() != b.len() || a.len() != lower_is_better.len() {
        return Err(WilcoxonError::LengthMismatch);
    }
    let pairs: Vec<PairedScore> = (0..a.len())
        .map(|i| PairedScore {
            task: i.to_string(),
            a: a[i],
            b: b[i],
            lower_is_better: lower_is_better[i],
            tie_winner: None,
        })
        .collect();
    compare_pairs(&pairs)
}

/// As [`wilcoxon_signed_rank`], with task names and tie winners. Tie winners
/// only affect the win counts; tied pairs never enter the test.
pub fn compare_pairs(pairs: &[PairedScore]) -> Result<ComparisonResult, WilcoxonError> {
    if pairs.len() < MIN_PAIRS {
        return Err(WilcoxonError::TooFew(pairs.len()));
    }
    let differences: Vec<(String, f64)> = pairs
        .iter()
        .map(|p| (p.task.clone(), normalized_difference(p.a, p.b, p.lower_is_better)))
        .collect();
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    for (p, (_, d)) in pairs.iter().zip(&differences) {
        match (*d > 0.0, *d < 0.0, p.tie_winner) {
            (true, _, _) => wins_a += 1,
            (_, true, _) => wins_b += 1,
            (_, _, Some(Side::A)) => wins_a += 1,
            (_, _, Some(Side::B)) => wins_b += 1,
            _ => ties += 1,
        }
    }
    let d: Vec<f64> = differences.iter().map(|(_, d)| *d).collect();
    let (w_plus, w_minus, p_value, method) = signed_rank_test(&d);
    Ok(ComparisonResult {
        n_pairs: pairs.len(),
        n_used: d.iter().filter(|&&x| x != 0.0).count(),
        wins_a,
        wins_b,
        ties,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        method,
        differences,
    })
}
