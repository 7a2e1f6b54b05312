//! Per-subject threshold search over replayed windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{
    replay_session, BandThresholds, CalibrationProfile, Combinator, TraceRow, DEFAULT_HOP_S, DEFAULT_REFRACTORY_S,
    DEFAULT_WINDOW_S,
};
use crate::classify::metrics::f_measure;
use crate::error::{Error, Result};
use crate::model::SubjectSession;

/// Searchable features: the five bands then DI.
pub const FEATURES: [&str; 6] = ["delta", "theta", "alpha", "beta", "gamma", "DI"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cap on candidate thresholds per feature; midpoints are thinned
    /// evenly beyond it.
    pub max_candidates: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub refractory_s: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            max_candidates: 512,
            window_s: DEFAULT_WINDOW_S,
            hop_s: DEFAULT_HOP_S,
            refractory_s: DEFAULT_REFRACTORY_S,
        }
    }
}

/// F1 of `predicted` against `truth`, positive = distraction.
pub fn window_f1(predicted: &[bool], truth: &[bool]) -> f64 {
    let tp = predicted.iter().zip(truth).filter(|(&p, &t)| p && t).count();
    let fp = predicted.iter().zip(truth).filter(|(&p, &t)| p && !t).count();
    let fneg = predicted.iter().zip(truth).filter(|(&p, &t)| !p && t).count();
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
    f_measure(precision, recall)
}

fn feature_value(row: &TraceRow, f: usize) -> f64 {
    if f < 5 {
        row.powers.to_array()[f]
    } else {
        row.di.unwrap_or(f64::NAN)
    }
}

/// Labeled window rows of every session.
fn labeled_rows(
    base: &[SubjectSession],
    distraction: &[SubjectSession],
    probe: &CalibrationProfile,
) -> Result<(Vec<TraceRow>, Vec<bool>)> {
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (sessions, label) in [(base, false), (distraction, true)] {
        for s in sessions {
            let r = replay_session(s, probe)?;
            truth.extend(std::iter::repeat_n(label, r.trace.len()));
            rows.extend(r.trace);
        }
    }
    Ok((rows, truth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    feature: usize,
    threshold: f64,
    f1: f64,
    alerts: usize,
}

impl Candidate {
    /// Higher F1, then fewer alerts, then earlier feature, then higher
    /// threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.f1 != other.f1 {
            return self.f1 > other.f1;
        }
        if self.alerts != other.alerts {
            return self.alerts < other.alerts;
        }
        if self.feature != other.feature {
            return self.feature < other.feature;
        }
        self.threshold > other.threshold
    }
}

/// Midpoints between consecutive distinct finite values: geometric for
/// positive pairs, since powers span orders of magnitude.
fn midpoints(values: &[f64], cap: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mids: Vec<f64> = v
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                (w[0] * w[1]).sqrt()
            } else {
                w[0] + (w[1] - w[0]) / 2.0
            }
        })
        .collect();
    if mids.len() <= cap || cap == 0 {
        return mids;
    }
    (0..cap)
        .map(|i| mids[i * (mids.len() - 1) / (cap - 1).max(1)])
        .collect()
}

fn best_for_feature(rows: &[TraceRow], truth: &[bool], feature: usize, cap: usize) -> Option<Candidate> {
    let values: Vec<f64> = rows.iter().map(|r| feature_value(r, feature)).collect();
    let mut best: Option<Candidate> = None;
    for threshold in midpoints(&values, cap) {
        if threshold <= 0.0 {
            continue;
        }
        let predicted: Vec<bool> = values.iter().map(|&v| v > threshold).collect();
        let c = Candidate {
            feature,
            threshold,
            f1: window_f1(&predicted, truth),
            alerts: predicted.iter().filter(|&&p| p).count(),
        };
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            best = Some(c);
        }
    }
    best
}

/// Searches single-feature thresholds maximizing window-level F1 of the
/// trigger predicate (refractory ignored) against session labels. Fails
/// when the best F1 does not beat alerting on every window.
pub fn calibrate_thresholds(
    subject_id: &str,
    base: &[SubjectSession],
    distraction: &[SubjectSession],
    grid: &GridSpec,
) -> Result<CalibrationProfile> {
    if base.is_empty() || distraction.is_empty() {
        return Err(Error::Parameter(
            "calibration needs at least one Base and one distraction session".into(),
        ));
    }
    let mut profile = CalibrationProfile {
        window_s: grid.window_s,
        hop_s: grid.hop_s,
        refractory_s: grid.refractory_s,
        ..CalibrationProfile::disabled(subject_id)
    };
    let (rows, truth) = labeled_rows(base, distraction, &profile)?;
    if !truth.iter().any(|&t| t) || truth.iter().all(|&t| t) {
        return Err(Error::Parameter("sessions too short for one window per class".into()));
    }
    let per_feature: Vec<Option<Candidate>> = (0..FEATURES.len())
        .into_par_iter()
        .map(|f| best_for_feature(&rows, &truth, f, grid.max_candidates))
        .collect();
    let mut best: Option<Candidate> = None;
    for c in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            best = Some(c);
        }
    }
    let always = window_f1(&vec![true; truth.len()], &truth);
    let best_f1 = best.map_or(0.0, |b| b.f1);
    let Some(best) = best.filter(|b| b.f1 > always + 1e-12) else {
        return Err(Error::CalibrationFailed { best_f1: best_f1.max(always) });
    };
    if best.feature < 5 {
        let mut t = [f64::INFINITY; 5];
        t[best.feature] = best.threshold;
        profile.thresholds = BandThresholds::from_array(t);
    } else {
        profile.di_threshold = best.threshold;
    }
    profile.combinator = Combinator::Any;
    Ok(profile)
}

/// Window-level F1 of `profile` on labeled sessions.
pub fn evaluate_profile(
    profile: &CalibrationProfile,
    base: &[SubjectSession],
    distraction: &[SubjectSession],
) -> Result<f64> {
    let (rows, truth) = labeled_rows(base, distraction, profile)?;
    let predicted: Vec<bool> = rows.iter().map(|r| profile.triggers(&r.powers, r.di).is_some()).collect();
    Ok(window_f1(&predicted, &truth))
}
