//! Wilcoxon matched-pairs signed-rank test.

use serde::{Deserialize, Serialize};

use super::special::normal_sf;
use super::{Method, Sided, TestReport};
use crate::error::{Error, Result};

/// Largest effective sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `x - y` tends to be positive.
    Greater,
    /// `x - y` tends to be negative.
    Less,
}

impl Alternative {
    pub fn sided(self) -> Sided {
        match self {
            Alternative::TwoSided => Sided::Two,
            _ => Sided::One,
        }
    }
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            "greater" | "one" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            _ => Err(Error::Parameter(format!("unknown alternative `{s}`"))),
        }
    }
}

/// How the p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Exact when the effective n is at most [`EXACT_MAX_N`].
    #[default]
    Auto,
    Exact,
    Approximate,
}

/// Signed ranks of the nonzero differences.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    /// Mid-ranks of `|d|`, in input order of the nonzero differences.
    pub ranks: Vec<f64>,
    pub positive: Vec<bool>,
    /// Sizes of tie groups among `|d|`.
    pub ties: Vec<usize>,
}

impl SignedRanks {
    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    pub fn w_plus(&self) -> f64 {
        self.ranks.iter().zip(&self.positive).filter(|(_, &p)| p).map(|(r, _)| r).sum()
    }

    pub fn w_minus(&self) -> f64 {
        self.ranks.iter().zip(&self.positive).filter(|(_, &p)| !p).map(|(r, _)| r).sum()
    }
}

/// Drops zero differences and mid-ranks the absolute values.
pub fn signed_ranks(x: &[f64], y: &[f64]) -> Result<SignedRanks> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|&d| d != 0.0).collect();
    if d.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    Ok(SignedRanks {
        positive: d.iter().map(|&v| v > 0.0).collect(),
        ranks,
        ties,
    })
}

/// Null distribution of `2 * W+` as counts over all `2^n` sign patterns.
/// Doubling keeps mid-ranks integral.
fn null_counts(ranks: &[f64]) -> Vec<f64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
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
    counts
}

/// `P(W+ <= w)` and `P(W+ >= w)` under the null, from the exact distribution.
pub fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let counts = null_counts(ranks);
    let all: f64 = counts.iter().sum();
    let w2 = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w2.min(counts.len() - 1)].iter().sum();
    let upper: f64 = counts[w2.min(counts.len())..].iter().sum();
    (lower / all, upper / all)
}

fn tie_corrected_sd(n: usize, ties: &[usize]) -> f64 {
    let n = n as f64;
    let adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - adj).sqrt()
}

/// Continuity-corrected z for `W+` in the direction of `alt`.
fn z_value(sr: &SignedRanks, alt: Alternative) -> f64 {
    let n = sr.n() as f64;
    let d = sr.w_plus() - n * (n + 1.0) / 4.0;
    let sd = tie_corrected_sd(sr.n(), &sr.ties);
    let correction = match alt {
        Alternative::Greater => 0.5,
        Alternative::Less => -0.5,
        Alternative::TwoSided => 0.5 * d.signum(),
    };
    if sd == 0.0 {
        return 0.0;
    }
    (d - correction) / sd
}

fn approximate_p(z: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::Greater => normal_sf(z),
        Alternative::Less => 1.0 - normal_sf(z),
        Alternative::TwoSided => (2.0 * normal_sf(z.abs())).min(1.0),
    }
}

fn exact_p(sr: &SignedRanks, alt: Alternative) -> f64 {
    let (lower, upper) = exact_tails(&sr.ranks, sr.w_plus());
    match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

/// Signed-rank test of `x - y`. The statistic is `W = min(W+, W-)`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alt: Alternative, alpha: f64) -> Result<TestReport> {
    wilcoxon_with_method(x, y, alt, alpha, MethodChoice::Auto)
}

pub fn wilcoxon_with_method(
    x: &[f64],
    y: &[f64],
    alt: Alternative,
    alpha: f64,
    choice: MethodChoice,
) -> Result<TestReport> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    if x.len() < 5 {
        return Err(Error::Parameter(format!("need at least 5 pairs, got {}", x.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let sr = signed_ranks(x, y)?;
    let n = sr.n();
    let method = match choice {
        MethodChoice::Auto if n <= EXACT_MAX_N => Method::Exact,
        MethodChoice::Auto => Method::NormalApproximation,
        MethodChoice::Exact if n > EXACT_MAX_N => {
            return Err(Error::Parameter(format!(
                "exact distribution limited to n <= {EXACT_MAX_N}, got {n}"
            )))
        }
        MethodChoice::Exact => Method::Exact,
        MethodChoice::Approximate => Method::NormalApproximation,
    };
    let z = z_value(&sr, alt);
    let p = match method {
        Method::Exact => exact_p(&sr, alt),
        _ => approximate_p(z, alt),
    };
    let p = p.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(TestReport {
        test: "wilcoxon_signed_rank".into(),
        statistic_name: "W".into(),
        statistic: sr.w_plus().min(sr.w_minus()) + 0.0,
        w_plus: Some(sr.w_plus() + 0.0),
        z_value: (method == Method::NormalApproximation).then_some(z),
        p_value: p,
        sided: alt.sided(),
        n,
        df: None,
        method,
        alpha,
        reject: p <= alpha,
    })
}

/// Largest `c` with `P(W <= c) <= alpha / 2` for `n` untied pairs, the
/// two-sided table value; `None` when no such `c` exists.
pub fn critical_value(n: usize, alpha: f64) -> Option<usize> {
    let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
    let counts = null_counts(&ranks);
    let all: f64 = counts.iter().sum();
    let mut cum = 0.0;
    let mut best = None;
    // doubled ranks: only even indices are populated
    for (w2, c) in counts.iter().enumerate() {
        cum += c;
        if w2 % 2 == 0 {
            if cum / all <= alpha / 2.0 {
                best = Some(w2 / 2);
            } else {
                break;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over every sign pattern.
    fn enumerate_tails(ranks: &[f64], w: f64) -> (f64, f64) {
        let n = ranks.len();
        let (mut lo, mut hi) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                lo += 1;
            }
            if s >= w - 1e-9 {
                hi += 1;
            }
        }
        let all = (1u64 << n) as f64;
        (lo as f64 / all, hi as f64 / all)
    }

    #[test]
    fn all_positive_five_one_sided() {
        let x = [2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.0; 5];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert_eq!(r.method, Method::Exact);
        assert!(r.reject);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            wilcoxon_signed_rank(&x, &x, Alternative::TwoSided, 0.05),
            Err(Error::Degenerate(_))
        ));
        assert!(wilcoxon_signed_rank(&x, &x[..4], Alternative::TwoSided, 0.05).is_err());
    }

    #[test]
    fn exact_tails_match_enumeration_with_ties() {
        let x = [1.0, 2.5, 3.0, -1.0, 4.0, 2.0, 7.0, 0.5, 3.0, -2.0];
        let y = [0.0; 10];
        let sr = signed_ranks(&x, &y).unwrap();
        assert!(!sr.ties.is_empty());
        for w in [0.0, 5.5, 10.0, sr.w_plus(), 27.5, 55.0] {
            let (a, b) = exact_tails(&sr.ranks, w);
            let (c, d) = enumerate_tails(&sr.ranks, w);
            assert!((a - c).abs() < 1e-15 && (b - d).abs() < 1e-15, "w = {w}");
        }
    }

    #[test]
    fn zero_differences_dropped() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let r = wilcoxon_signed_rank(&x, &y, Alternative::Greater, 0.05).unwrap();
        assert_eq!(r.n, 5);
        assert_eq!(r.p_value, 1.0 / 32.0);
    }

    #[test]
    fn critical_value_n15() {
        assert_eq!(critical_value(15, 0.05), Some(25));
        assert_eq!(critical_value(5, 0.05), None);
        assert_eq!(critical_value(6, 0.05), Some(0));
    }

    #[test]
    fn approximation_close_to_exact() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 1.7).sin() + 0.4).collect();
        let y = vec![0.0; 12];
        let e = wilcoxon_with_method(&x, &y, Alternative::TwoSided, 0.05, MethodChoice::Exact).unwrap();
        let a = wilcoxon_with_method(&x, &y, Alternative::TwoSided, 0.05, MethodChoice::Approximate).unwrap();
        assert!((e.p_value - a.p_value).abs() < 0.02, "{} vs {}", e.p_value, a.p_value);
    }
}
