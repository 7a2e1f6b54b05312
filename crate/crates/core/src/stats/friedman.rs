//! Friedman two-way rank test, with optional replicates per block.

use super::special::chi2_sf;
use super::{Method, Sided, TestReport};
use crate::error::{Error, Result};

/// Mid-ranks of `values`, 1-based, plus `sum(t^3 - t)` over tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_sum)
}

/// Friedman test on `rows` (blocks x treatments).
///
/// With `reps > 1`, every `reps` consecutive rows form one block and are
/// ranked jointly across all `reps x k` cells. `reps = 1` is the classic
/// `12 / (n k (k + 1)) * sum R_j^2 - 3 n (k + 1)` with tie correction.
pub fn friedman(rows: &[Vec<f64>], reps: usize, alpha: f64) -> Result<TestReport> {
    if reps == 0 || !rows.len().is_multiple_of(reps.max(1)) {
        return Err(Error::Parameter(format!(
            "{} rows do not split into blocks of {reps} replicates",
            rows.len()
        )));
    }
    let blocks = rows.len() / reps;
    let k = rows.first().map_or(0, Vec::len);
    if k < 2 || blocks < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 blocks and 2 treatments, got {blocks} x {k}"
        )));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Parameter("ragged treatment matrix".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite observation".into()));
    }
    let mut col_sums = vec![0.0; k];
    let mut tie_sum = 0.0;
    for block in rows.chunks(reps) {
        let cells: Vec<f64> = block.iter().flatten().copied().collect();
        let (ranks, t) = midranks(&cells);
        tie_sum += t;
        for (i, r) in ranks.iter().enumerate() {
            col_sums[i % k] += r;
        }
    }
    let per_col = (blocks * reps) as f64;
    let col_means: Vec<f64> = col_sums.iter().map(|s| s / per_col).collect();
    let grand = col_means.iter().sum::<f64>() / k as f64;
    let ss_cols = per_col * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let kr = (k * reps) as f64;
    let variance = k as f64 * reps as f64 * (kr + 1.0) / 12.0 - tie_sum / (12.0 * blocks as f64 * (kr - 1.0));
    if variance <= 1e-12 {
        return Err(Error::Degenerate("every block is constant".into()));
    }
    let chi2 = ss_cols / variance;
    let df = k - 1;
    let p = chi2_sf(chi2, df as f64).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(TestReport {
        test: "friedman".into(),
        statistic_name: "chi2".into(),
        statistic: chi2,
        w_plus: None,
        z_value: None,
        p_value: p,
        sided: Sided::One,
        n: blocks,
        df: Some(df),
        method: Method::ChiSquareApproximation,
        alpha,
        reject: p <= alpha,
    })
}
