//! Sliding-window band-power detector with refractory alerts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dsp::{band_powers, Band};
use crate::error::{Error, Result};
use crate::index::distraction_index;
use crate::model::{BandPowers, Device, EegSample, SubjectSession};
use crate::protocol::scalp_microvolts;

pub const DEFAULT_WINDOW_S: f64 = 4.0;
pub const DEFAULT_HOP_S: f64 = 1.0;
pub const DEFAULT_REFRACTORY_S: f64 = 10.0;
/// Slack on time comparisons, seconds.
const TIME_EPS: f64 = 1e-9;

/// Infinite thresholds serialize as `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Per-band power thresholds, µV²/Hz. `f64::INFINITY` disables a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    #[serde(with = "inf_as_null")]
    pub delta: f64,
    #[serde(with = "inf_as_null")]
    pub theta: f64,
    #[serde(with = "inf_as_null")]
    pub alpha: f64,
    #[serde(with = "inf_as_null")]
    pub beta: f64,
    #[serde(with = "inf_as_null")]
    pub gamma: f64,
}

impl BandThresholds {
    pub fn disabled() -> Self {
        Self::from_array([f64::INFINITY; 5])
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            delta: v[0],
            theta: v[1],
            alpha: v[2],
            beta: v[3],
            gamma: v[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.delta, self.theta, self.alpha, self.beta, self.gamma]
    }
}

/// How individual threshold crossings combine into an alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    /// Any enabled threshold crossed.
    #[default]
    Any,
    /// Every enabled threshold crossed.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub subject_id: String,
    pub thresholds: BandThresholds,
    #[serde(with = "inf_as_null")]
    pub di_threshold: f64,
    pub refractory_s: f64,
    pub window_s: f64,
    pub hop_s: f64,
    #[serde(default)]
    pub combinator: Combinator,
}

impl CalibrationProfile {
    /// Everything disabled, default timing.
    pub fn disabled(subject_id: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            thresholds: BandThresholds::disabled(),
            di_threshold: f64::INFINITY,
            refractory_s: DEFAULT_REFRACTORY_S,
            window_s: DEFAULT_WINDOW_S,
            hop_s: DEFAULT_HOP_S,
            combinator: Combinator::Any,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.thresholds.to_array().into_iter().chain([self.di_threshold]);
        for v in all {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Parameter(format!("threshold {v} must be positive")));
            }
        }
        if !(self.window_s >= 2.0) || !self.window_s.is_finite() {
            return Err(Error::Parameter(format!("window {} s shorter than 2 s", self.window_s)));
        }
        if !(self.hop_s > 0.0) || !self.hop_s.is_finite() {
            return Err(Error::Parameter(format!("hop {} s must be positive", self.hop_s)));
        }
        if !(self.refractory_s >= self.hop_s) {
            return Err(Error::Parameter(format!(
                "refractory {} s shorter than hop {} s",
                self.refractory_s, self.hop_s
            )));
        }
        Ok(())
    }

    pub fn window_samples(&self, fs: f64) -> usize {
        (self.window_s * fs).round() as usize
    }

    pub fn hop_samples(&self, fs: f64) -> usize {
        ((self.hop_s * fs).round() as usize).max(1)
    }

    /// Names of crossed thresholds, or `None` when the combinator does
    /// not fire. Refractory is not considered here.
    pub fn triggers(&self, bp: &BandPowers, di: Option<f64>) -> Option<Vec<String>> {
        let mut enabled = 0;
        let mut crossed = Vec::new();
        for (band, (&value, &limit)) in Band::ALL
            .iter()
            .zip(bp.to_array().iter().zip(&self.thresholds.to_array()))
        {
            if limit.is_finite() {
                enabled += 1;
                if value > limit {
                    crossed.push(band.name().to_string());
                }
            }
        }
        if self.di_threshold.is_finite() {
            enabled += 1;
            if di.is_some_and(|d| d > self.di_threshold) {
                crossed.push("DI".to_string());
            }
        }
        let fires = match self.combinator {
            Combinator::Any => !crossed.is_empty(),
            Combinator::All => enabled > 0 && crossed.len() == enabled,
        };
        fires.then_some(crossed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    /// Time of the newest sample in the triggering window.
    pub t: f64,
    pub triggers: Vec<String>,
    pub observed: BandPowers,
    pub di: Option<f64>,
    /// Instantaneous DI at the trigger, when defined.
    pub severity: Option<f64>,
}

/// Band powers and DI of one evaluated window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub powers: BandPowers,
    pub di: Option<f64>,
}

/// Band powers and DI of a window of raw counts.
pub fn window_features(raw: impl IntoIterator<Item = i16>, fs: f64) -> Result<(BandPowers, Option<f64>)> {
    let uv: Vec<f64> = raw.into_iter().map(|r| scalp_microvolts(r as f64)).collect();
    let bp = band_powers(&uv, fs)?;
    let di = distraction_index(&bp).ok().map(|d| d.value());
    Ok((bp, di))
}

/// Single-owner detector state for one raw stream.
#[derive(Debug, Clone)]
pub struct DetectorState {
    profile: CalibrationProfile,
    fs: f64,
    window: usize,
    hop: usize,
    buffer: VecDeque<i16>,
    seen: u64,
    last_t: Option<f64>,
    last_alert: Option<f64>,
    corrupt_packets: u64,
}

impl DetectorState {
    pub fn new(profile: CalibrationProfile, fs: f64) -> Result<Self> {
        profile.validate()?;
        if !(fs > 0.0) {
            return Err(Error::Parameter(format!("sampling rate {fs}")));
        }
        let window = profile.window_samples(fs);
        Ok(Self {
            hop: profile.hop_samples(fs),
            window,
            buffer: VecDeque::with_capacity(window),
            profile,
            fs,
            seen: 0,
            last_t: None,
            last_alert: None,
            corrupt_packets: 0,
        })
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn samples_seen(&self) -> u64 {
        self.seen
    }

    pub fn last_alert(&self) -> Option<f64> {
        self.last_alert
    }

    pub fn corrupt_packets(&self) -> u64 {
        self.corrupt_packets
    }

    pub fn note_corrupt(&mut self, frames: u64) {
        self.corrupt_packets += frames;
    }

    /// Buffers one sample and, on hop boundaries, evaluates the window.
    pub fn process_sample(&mut self, sample: EegSample) -> Result<(Option<TraceRow>, Option<AlertEvent>)> {
        if let Some(prev) = self.last_t {
            if !(sample.t >= prev) {
                return Err(Error::OutOfOrder { t: sample.t, previous: prev });
            }
        }
        self.last_t = Some(sample.t);
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample.raw);
        self.seen += 1;
        let seen = self.seen as usize;
        if seen < self.window || !(seen - self.window).is_multiple_of(self.hop) {
            return Ok((None, None));
        }
        let (powers, di) = window_features(self.buffer.iter().copied(), self.fs)?;
        let row = TraceRow { t: sample.t, powers, di };
        let alert = decide(&self.profile, &row, &mut self.last_alert);
        Ok((Some(row), alert))
    }

    /// Like [`process_sample`](Self::process_sample), keeping only the alert.
    pub fn push(&mut self, sample: EegSample) -> Result<Option<AlertEvent>> {
        Ok(self.process_sample(sample)?.1)
    }
}

/// Applies the trigger predicate and the refractory gap.
fn decide(profile: &CalibrationProfile, row: &TraceRow, last_alert: &mut Option<f64>) -> Option<AlertEvent> {
    let triggers = profile.triggers(&row.powers, row.di)?;
    if let Some(prev) = *last_alert {
        if row.t - prev < profile.refractory_s - TIME_EPS {
            return None;
        }
    }
    *last_alert = Some(row.t);
    Some(AlertEvent {
        t: row.t,
        triggers,
        observed: row.powers,
        di: row.di,
        severity: row.di,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub trace: Vec<TraceRow>,
    pub alerts: Vec<AlertEvent>,
}

impl Replay {
    /// `t,delta,theta,alpha,beta,gamma,di`; undefined DI is left empty.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,delta,theta,alpha,beta,gamma,di\n");
        for r in &self.trace {
            let p = r.powers;
            out += &format!("{},{},{},{},{},{},", r.t, p.delta, p.theta, p.alpha, p.beta, p.gamma);
            if let Some(d) = r.di {
                out += &d.to_string();
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every hop window of a recorded single-electrode session by
/// slicing it directly.
pub fn replay_session(session: &SubjectSession, profile: &CalibrationProfile) -> Result<Replay> {
    let fs = Device::SingleElectrode512.fs();
    if session.fs() != fs {
        return Err(Error::SampleRateMismatch(format!(
            "replay needs {fs} Hz, session is {} Hz",
            session.fs()
        )));
    }
    profile.validate()?;
    let mut out = Replay::default();
    let Some(raw) = session.samples().first() else {
        return Ok(out);
    };
    let window = profile.window_samples(fs);
    let hop = profile.hop_samples(fs);
    let mut last_alert = None;
    let mut end = window;
    while end <= raw.len() {
        let (powers, di) = window_features(raw[end - window..end].iter().copied(), fs)?;
        let row = TraceRow {
            t: (end - 1) as f64 / fs,
            powers,
            di,
        };
        if let Some(a) = decide(profile, &row, &mut last_alert) {
            out.alerts.push(a);
        }
        out.trace.push(row);
        end += hop;
    }
    Ok(out)
}

/// Feeds samples one by one through a fresh detector.
pub fn stream_samples(
    samples: impl IntoIterator<Item = EegSample>,
    profile: &CalibrationProfile,
    fs: f64,
) -> Result<Replay> {
    let mut state = DetectorState::new(profile.clone(), fs)?;
    let mut out = Replay::default();
    for s in samples {
        let (row, alert) = state.process_sample(s)?;
        out.trace.extend(row);
        out.alerts.extend(alert);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(raw: Vec<i16>) -> SubjectSession {
        SubjectSession::single_electrode("s", crate::model::TaskLabel::Base, raw).unwrap()
    }

    fn noise(n: usize, amp: f64, seed: u64) -> Vec<i16> {
        // small deterministic LCG, enough for a flat spectrum
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (((x >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 2.0 * amp).round() as i16
            })
            .collect()
    }

    #[test]
    fn profile_serializes_infinity_as_null() {
        let p = CalibrationProfile::disabled("s1");
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"beta\":null"));
        let back: CalibrationProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn profile_validation() {
        let mut p = CalibrationProfile::disabled("s");
        p.window_s = 1.5;
        assert!(p.validate().is_err());
        let mut p = CalibrationProfile::disabled("s");
        p.refractory_s = 0.5;
        assert!(p.validate().is_err());
        let mut p = CalibrationProfile::disabled("s");
        p.thresholds.beta = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn quiet_stream_raises_nothing() {
        let s = session(noise(512 * 60, 3.0, 1));
        let mut p = CalibrationProfile::disabled("s");
        p.thresholds = BandThresholds::from_array([1e6; 5]);
        let r = replay_session(&s, &p).unwrap();
        assert!(r.alerts.is_empty());
        assert_eq!(r.trace.len(), 60 - 4 + 1);
    }

    #[test]
    fn infinite_thresholds_trace_only() {
        let s = session(noise(512 * 10, 50.0, 2));
        let r = replay_session(&s, &CalibrationProfile::disabled("s")).unwrap();
        assert_eq!(r.trace.len(), 7);
        assert!(r.alerts.is_empty());
    }

    #[test]
    fn empty_session() {
        let r = replay_session(&session(Vec::new()), &CalibrationProfile::disabled("s")).unwrap();
        assert_eq!(r, Replay::default());
    }

    #[test]
    fn out_of_order_rejected() {
        let mut d = DetectorState::new(CalibrationProfile::disabled("s"), 512.0).unwrap();
        d.process_sample(EegSample { t: 1.0, raw: 0 }).unwrap();
        d.process_sample(EegSample { t: 1.0, raw: 0 }).unwrap();
        assert!(matches!(
            d.process_sample(EegSample { t: 0.5, raw: 0 }),
            Err(Error::OutOfOrder { .. })
        ));
    }

    #[test]
    fn buffer_is_bounded() {
        let p = CalibrationProfile::disabled("s");
        let mut d = DetectorState::new(p, 512.0).unwrap();
        for (i, raw) in noise(512 * 9, 20.0, 3).into_iter().enumerate() {
            d.process_sample(EegSample { t: i as f64 / 512.0, raw }).unwrap();
            assert!(d.buffered() <= 2048);
        }
    }

    #[test]
    fn wrong_rate() {
        let s = SubjectSession::new(
            "m",
            Device::MultiElectrode128,
            crate::model::TaskLabel::Base,
            vec!["FC5".into()],
            vec![vec![0; 1024]],
        )
        .unwrap();
        assert!(matches!(
            replay_session(&s, &CalibrationProfile::disabled("m")),
            Err(Error::SampleRateMismatch(_))
        ));
    }

    #[test]
    fn all_combinator_needs_every_enabled_threshold() {
        let mut p = CalibrationProfile::disabled("s");
        p.combinator = Combinator::All;
        let bp = BandPowers::from_array([1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(p.triggers(&bp, Some(1.0)).is_none());
        p.thresholds.beta = 3.5;
        p.thresholds.gamma = 4.5;
        assert_eq!(p.triggers(&bp, None).unwrap(), vec!["beta", "gamma"]);
        p.di_threshold = 2.0;
        assert!(p.triggers(&bp, Some(1.0)).is_none());
    }
}
