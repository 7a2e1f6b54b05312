//! Nonparametric tests and the bundled study tables.

pub mod friedman;
pub mod special;
pub mod wilcoxon;

use serde::{Deserialize, Serialize};

pub use friedman::{friedman, midranks};
pub use special::{chi2_sf, gamma_q, ln_gamma, normal_cdf, normal_sf};
pub use wilcoxon::{
    critical_value, signed_ranks, wilcoxon_signed_rank, wilcoxon_with_method, Alternative, MethodChoice,
    SignedRanks, EXACT_MAX_N,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApproximation,
    ChiSquareApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    /// `W` or `chi2`.
    pub statistic_name: String,
    pub statistic: f64,
    /// Positive signed-rank sum, Wilcoxon only.
    pub w_plus: Option<f64>,
    pub z_value: Option<f64>,
    pub p_value: f64,
    pub sided: Sided,
    pub n: usize,
    pub df: Option<usize>,
    pub method: Method,
    pub alpha: f64,
    pub reject: bool,
}

impl TestReport {
    pub fn summary(&self) -> String {
        let mut s = format!("{}: {} = {}", self.test, self.statistic_name, trim(self.statistic));
        if let Some(df) = self.df {
            s += &format!(", df = {df}");
        }
        if let Some(z) = self.z_value {
            s += &format!(", z = {z:.4}");
        }
        s += &format!(
            ", p = {:.5e} ({:?}, {:?}-sided, n = {}), {} at alpha = {:.4}",
            self.p_value,
            self.method,
            self.sided,
            self.n,
            if self.reject { "reject" } else { "retain" },
            self.alpha
        );
        s
    }
}

fn trim(v: f64) -> String {
    let v = v + 0.0;
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// One post-hoc comparison; a degenerate pair keeps its error instead of
/// aborting the family.
#[derive(Debug)]
pub struct PairOutcome {
    pub name: String,
    pub result: Result<TestReport>,
}

/// Wilcoxon tests on each `(name, x, y)` at `family_alpha / m`. The
/// p-value and z come from the continuity-corrected normal approximation
/// regardless of n.
pub fn posthoc_wilcoxon_bonferroni(
    pairs: &[(String, Vec<f64>, Vec<f64>)],
    family_alpha: f64,
    alt: Alternative,
) -> Vec<PairOutcome> {
    let per_pair = family_alpha / pairs.len().max(1) as f64;
    pairs
        .iter()
        .map(|(name, x, y)| PairOutcome {
            name: name.clone(),
            result: wilcoxon_with_method(x, y, alt, per_pair, MethodChoice::Approximate),
        })
        .collect()
}

pub const TABLE5_CSV: &str = include_str!("../../fixtures/table5.csv");
pub const TABLE6_CSV: &str = include_str!("../../fixtures/table6.csv");

/// Per-subject mean DI at baseline and under distraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Table5 {
    pub subjects: Vec<u32>,
    pub baseline: Vec<f64>,
    pub distraction: Vec<f64>,
}

/// Per-trial DI for each electrode, four trials per activity.
#[derive(Debug, Clone, PartialEq)]
pub struct Table6 {
    pub electrodes: Vec<String>,
    /// `(activity, trial)` of each row.
    pub rows: Vec<(String, u32)>,
    pub values: Vec<Vec<f64>>,
}

impl Table6 {
    pub fn column(&self, electrode: &str) -> Result<Vec<f64>> {
        let j = self
            .electrodes
            .iter()
            .position(|e| e == electrode)
            .ok_or_else(|| Error::MissingColumn(electrode.to_string()))?;
        Ok(self.values.iter().map(|r| r[j]).collect())
    }

    /// Trials per activity, assuming rows are grouped by activity.
    pub fn replicates(&self) -> usize {
        let first = self.rows.first().map(|r| r.0.as_str());
        self.rows.iter().take_while(|r| Some(r.0.as_str()) == first).count()
    }
}

fn parse_err(name: &str, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: name.into(),
        message: message.to_string(),
    }
}

pub fn parse_table5(text: &str) -> Result<Table5> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut t = Table5 {
        subjects: Vec::new(),
        baseline: Vec::new(),
        distraction: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err("table5", e))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| parse_err("table5", "short row"));
        t.subjects.push(field(0)?.trim().parse().map_err(|e| parse_err("table5", e))?);
        t.baseline.push(field(1)?.trim().parse().map_err(|e| parse_err("table5", e))?);
        t.distraction.push(field(2)?.trim().parse().map_err(|e| parse_err("table5", e))?);
    }
    Ok(t)
}

pub fn parse_table6(text: &str) -> Result<Table6> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err("table6", e))?.clone();
    if headers.len() < 4 {
        return Err(parse_err("table6", "expected activity, trial and electrode columns"));
    }
    let electrodes: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err("table6", e))?;
        if rec.len() != headers.len() {
            return Err(parse_err("table6", format!("row has {} fields", rec.len())));
        }
        let trial = rec[1].trim().parse().map_err(|e| parse_err("table6", e))?;
        rows.push((rec[0].to_string(), trial));
        values.push(
            rec.iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>().map_err(|e| parse_err("table6", e)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(Table6 {
        electrodes,
        rows,
        values,
    })
}

pub fn table5() -> Table5 {
    parse_table5(TABLE5_CSV).expect("bundled table 5 parses")
}

pub fn table6() -> Table6 {
    parse_table6(TABLE6_CSV).expect("bundled table 6 parses")
}

pub const FAMILY_ALPHA: f64 = 0.05;

/// Baseline versus distraction DI, two-sided.
pub fn table5_report(alpha: f64) -> Result<TestReport> {
    let t = table5();
    wilcoxon_signed_rank(&t.baseline, &t.distraction, Alternative::TwoSided, alpha)
}

#[derive(Debug)]
pub struct Table6Reports {
    pub friedman: Result<TestReport>,
    pub posthoc: Vec<PairOutcome>,
}

/// Friedman over electrodes, with the trials of each activity as
/// replicates, then FC5 against its three closest rivals.
pub fn table6_reports(alpha: f64) -> Result<Table6Reports> {
    let t = table6();
    let fc5 = t.column("FC5")?;
    let pairs = ["FC6", "O1", "O2"]
        .iter()
        .map(|&e| Ok((format!("FC5-{e}"), fc5.clone(), t.column(e)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table6Reports {
        friedman: friedman(&t.values, t.replicates(), alpha),
        posthoc: posthoc_wilcoxon_bonferroni(&pairs, alpha, Alternative::Greater),
    })
}
