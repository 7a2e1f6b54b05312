//! Domain types shared across the pipeline and session segmentation into
//! fixed-length labeled trials.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{RAW_MAX, RAW_MIN};

/// One timestamped raw ADC sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EegSample {
    /// Seconds since session start.
    pub t: f64,
    /// ADC count in `[-2048, 2047]`.
    pub raw: i16,
}

/// Driving condition a recording was taken under. `Base` is undistracted
/// driving and the only negative class of the two-class problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskLabel {
    Base,
    Read,
    Text,
    Call,
    Snapshot,
}

impl TaskLabel {
    pub const ALL: [TaskLabel; 5] = [
        TaskLabel::Base,
        TaskLabel::Read,
        TaskLabel::Text,
        TaskLabel::Call,
        TaskLabel::Snapshot,
    ];

    pub const DISTRACTIONS: [TaskLabel; 4] = [
        TaskLabel::Read,
        TaskLabel::Text,
        TaskLabel::Call,
        TaskLabel::Snapshot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskLabel::Base => "Base",
            TaskLabel::Read => "Read",
            TaskLabel::Text => "Text",
            TaskLabel::Call => "Call",
            TaskLabel::Snapshot => "Snapshot",
        }
    }

    /// Position in enum order; used for deterministic tie-breaking.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_distraction(self) -> bool {
        self != TaskLabel::Base
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskLabel::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// Recording hardware. The device fixes the sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Device {
    /// Single dry electrode headband, 512 Hz.
    SingleElectrode512,
    /// 14-electrode saline headset, 128 Hz.
    MultiElectrode128,
}

impl Device {
    pub fn fs(self) -> f64 {
        match self {
            Device::SingleElectrode512 => 512.0,
            Device::MultiElectrode128 => 128.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Device::SingleElectrode512 => "SingleElectrode512",
            Device::MultiElectrode128 => "MultiElectrode128",
        }
    }
}

impl FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "SingleElectrode512" => Ok(Device::SingleElectrode512),
            "MultiElectrode128" => Ok(Device::MultiElectrode128),
            other => Err(Error::UnknownDevice(other.to_string())),
        }
    }
}

/// A validated recording of one subject performing one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSession {
    subject_id: String,
    device: Device,
    task: TaskLabel,
    channels: Vec<String>,
    samples: Vec<Vec<i16>>,
}

impl SubjectSession {
    /// Builds a session, checking channel names are unique, every channel
    /// has the same length and every sample is in ADC range.
    pub fn new(
        subject_id: impl Into<String>,
        device: Device,
        task: TaskLabel,
        channels: Vec<String>,
        samples: Vec<Vec<i16>>,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidSession("no channels".into()));
        }
        if channels.len() != samples.len() {
            return Err(Error::InvalidSession(format!(
                "{} channel names but {} sample streams",
                channels.len(),
                samples.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &channels {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSession(format!("duplicate channel `{name}`")));
            }
        }
        let len = samples[0].len();
        if let Some((i, _)) = samples.iter().enumerate().find(|(_, s)| s.len() != len) {
            return Err(Error::InvalidSession(format!(
                "channel `{}` has {} samples, expected {len}",
                channels[i],
                samples[i].len()
            )));
        }
        for stream in &samples {
            if let Some(&bad) = stream
                .iter()
                .find(|&&v| !(RAW_MIN..=RAW_MAX).contains(&i32::from(v)))
            {
                return Err(Error::OutOfRange {
                    value: bad.into(),
                    min: RAW_MIN.into(),
                    max: RAW_MAX.into(),
                });
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            device,
            task,
            channels,
            samples,
        })
    }

    /// Single-channel FC5 session on the 512 Hz headband.
    pub fn single_electrode(
        subject_id: impl Into<String>,
        task: TaskLabel,
        samples: Vec<i16>,
    ) -> Result<Self> {
        Self::new(
            subject_id,
            Device::SingleElectrode512,
            task,
            vec!["FC5".to_string()],
            vec![samples],
        )
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn device(&self) -> Device {
        self.device
    }

    pub fn fs(&self) -> f64 {
        self.device.fs()
    }

    pub fn task(&self) -> TaskLabel {
        self.task
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn samples(&self) -> &[Vec<i16>] {
        &self.samples
    }

    pub fn channel(&self, name: &str) -> Option<&[i16]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.samples[i].as_slice())
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs()
    }

    /// Timestamped samples of one channel, `t = i / fs`.
    pub fn timestamped(&self, channel: usize) -> impl Iterator<Item = EegSample> + '_ {
        let fs = self.fs();
        self.samples[channel]
            .iter()
            .enumerate()
            .map(move |(i, &raw)| EegSample {
                t: i as f64 / fs,
                raw,
            })
    }

    /// Returns a copy with the task label replaced.
    pub fn with_task(mut self, task: TaskLabel) -> Self {
        self.task = task;
        self
    }
}

/// Trial length in seconds, restricted to `[3, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TrialDuration(f64);

impl TrialDuration {
    pub fn new(seconds: f64) -> Result<Self> {
        if (3.0..=5.0).contains(&seconds) {
            Ok(Self(seconds))
        } else {
            Err(Error::InvalidTrialDuration(seconds))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Samples per trial at `fs`.
    pub fn samples(self, fs: f64) -> usize {
        (self.0 * fs).round() as usize
    }
}

impl Default for TrialDuration {
    fn default() -> Self {
        Self(4.0)
    }
}

/// A fixed-duration labeled segment of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialWindow {
    pub subject_id: String,
    pub task: TaskLabel,
    pub channel: String,
    pub fs: f64,
    pub duration: f64,
    pub trial_index: usize,
    pub samples: Vec<i16>,
}

impl TrialWindow {
    /// Sample values converted to microvolts.
    pub fn microvolts(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|&r| crate::protocol::scalp_microvolts(f64::from(r)))
            .collect()
    }
}

/// Splits every channel into `floor(N / L)` consecutive, non-overlapping
/// trials of `L = round(duration * fs)` samples; any trailing remainder is
/// dropped. The result is ordered by trial index, then channel order.
pub fn split_into_trials(
    session: &SubjectSession,
    duration: TrialDuration,
) -> Result<Vec<TrialWindow>> {
    let per_trial = duration.samples(session.fs());
    let available = session.len();
    if available < per_trial {
        return Err(Error::SessionTooShort {
            available,
            required: per_trial,
        });
    }
    let count = available / per_trial;
    let mut trials = Vec::with_capacity(count * session.channels.len());
    for trial_index in 0..count {
        let range = trial_index * per_trial..(trial_index + 1) * per_trial;
        for (channel, stream) in session.channels.iter().zip(&session.samples) {
            trials.push(TrialWindow {
                subject_id: session.subject_id.clone(),
                task: session.task,
                channel: channel.clone(),
                fs: session.fs(),
                duration: duration.seconds(),
                trial_index,
                samples: stream[range.clone()].to_vec(),
            });
        }
    }
    Ok(trials)
}

/// Groups the output of [`split_into_trials`] into per-trial channel sets.
pub fn group_by_trial(trials: Vec<TrialWindow>) -> Vec<Vec<TrialWindow>> {
    let mut groups: BTreeMap<usize, Vec<TrialWindow>> = BTreeMap::new();
    for t in trials {
        groups.entry(t.trial_index).or_default().push(t);
    }
    groups.into_values().collect()
}

/// Trial counts for one subject, indexed by [`TaskLabel::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub counts: [usize; 5],
}

impl TaskCounts {
    pub fn get(&self, task: TaskLabel) -> usize {
        self.counts[task.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Per-subject, per-task trial counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub subjects: BTreeMap<String, TaskCounts>,
}

impl DatasetSummary {
    /// Renders the table as CSV: `subject,Base,Read,Text,Call,Snapshot,total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject,Base,Read,Text,Call,Snapshot,total\n");
        for (subject, row) in &self.subjects {
            out.push_str(subject);
            for c in row.counts {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{}\n", row.total()));
        }
        out
    }
}

/// Counts the trials each session yields at `duration`. Sessions shorter
/// than one trial contribute zero.
pub fn dataset_summary(sessions: &[SubjectSession], duration: TrialDuration) -> DatasetSummary {
    let mut summary = DatasetSummary::default();
    for s in sessions {
        let n = s.len() / duration.samples(s.fs());
        summary
            .subjects
            .entry(s.subject_id.clone())
            .or_default()
            .counts[s.task.index()] += n;
    }
    summary
}

/// Mean power spectral density per canonical band, in µV²/Hz.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BandPowers {
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

    pub fn scaled(self, k: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * k))
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Which feature families go into a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Fft,
    Dwt,
    Combined,
}

impl FeatureMode {
    /// Features contributed by each channel.
    pub fn per_channel(self) -> usize {
        match self {
            FeatureMode::Fft => 5,
            FeatureMode::Dwt => 10,
            FeatureMode::Combined => 15,
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fft" => Ok(FeatureMode::Fft),
            "dwt" => Ok(FeatureMode::Dwt),
            "combined" => Ok(FeatureMode::Combined),
            _ => Err(Error::Parameter(format!("unknown feature mode `{s}`"))),
        }
    }
}

/// A labeled feature vector with its attribute names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: Vec<String>,
    pub label: TaskLabel,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, schema: Vec<String>, label: TaskLabel) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} values for {} attributes",
                values.len(),
                schema.len()
            )));
        }
        Ok(Self {
            values,
            schema,
            label,
        })
    }
}
