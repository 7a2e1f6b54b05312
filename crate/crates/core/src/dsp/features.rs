//! Per-trial feature blocks and vector assembly.

use crate::dsp::spectrum::{band_powers_fft, Band};
use crate::dsp::wavelet::{dwt_db8, Extension};
use crate::error::{Error, Result};
use crate::model::{
    group_by_trial, split_into_trials, FeatureMode, FeatureVector, SubjectSession, TrialDuration,
    TrialWindow,
};

/// Detail level holding the gamma band at `fs`: the level whose nominal
/// range is `[32, 64)` Hz. Beta, alpha and theta sit one, two and three
/// levels deeper; delta is the next detail level plus the approximation.
pub fn gamma_level(fs: f64) -> Result<usize> {
    let ratio = fs / 64.0;
    let level = ratio.log2().round();
    if level < 1.0 || (2f64.powf(level) - ratio).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "no dyadic band mapping for fs = {fs} Hz (need 64 * 2^k, k >= 1)"
        )));
    }
    Ok(level as usize)
}

/// Detail levels for each band in `Band::ALL` order. The delta entry is
/// combined with the final approximation.
pub fn band_levels(fs: f64) -> Result<[usize; 5]> {
    let g = gamma_level(fs)?;
    Ok([g + 4, g + 3, g + 2, g + 1, g])
}

fn mean_abs_and_power<'a>(coeffs: impl Iterator<Item = &'a f64> + Clone) -> (f64, f64) {
    let n = coeffs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let (abs, sq) = coeffs.fold((0.0, 0.0), |(a, s), c| (a + c.abs(), s + c * c));
    (abs / n as f64, sq / n as f64)
}

/// Mean |c| and mean c² of the band-mapped wavelet levels, in
/// `(delta, theta, alpha, beta, gamma)` order.
pub fn dwt_features_signal(signal_uv: &[f64], fs: f64) -> Result<[f64; 10]> {
    let levels = band_levels(fs)?;
    let depth = levels[0];
    let dec = dwt_db8(signal_uv, depth, Extension::Symmetric)?;
    let mut out = [0.0; 10];
    for (i, &level) in levels.iter().enumerate() {
        let (m, p) = if i == 0 {
            mean_abs_and_power(dec.detail(level).iter().chain(&dec.approximation))
        } else {
            mean_abs_and_power(dec.detail(level).iter())
        };
        out[2 * i] = m;
        out[2 * i + 1] = p;
    }
    Ok(out)
}

pub fn dwt_features(trial: &TrialWindow) -> Result<[f64; 10]> {
    dwt_features_signal(&trial.microvolts(), trial.fs)
}

fn fft_names(channel: &str) -> impl Iterator<Item = String> + '_ {
    Band::ALL.iter().map(move |b| format!("{channel}_fft_{}", b.name()))
}

fn dwt_names(channel: &str) -> impl Iterator<Item = String> + '_ {
    Band::ALL.iter().flat_map(move |b| {
        [
            format!("{channel}_dwt_{}_mean_abs", b.name()),
            format!("{channel}_dwt_{}_power", b.name()),
        ]
    })
}

/// Attribute names for `channels` under `mode`.
pub fn feature_schema(channels: &[String], mode: FeatureMode) -> Vec<String> {
    let mut schema = Vec::with_capacity(channels.len() * mode.per_channel());
    for ch in channels {
        if matches!(mode, FeatureMode::Fft | FeatureMode::Combined) {
            schema.extend(fft_names(ch));
        }
        if matches!(mode, FeatureMode::Dwt | FeatureMode::Combined) {
            schema.extend(dwt_names(ch));
        }
    }
    schema
}

/// Builds the feature vector of one trial from its per-channel windows,
/// taken in the given channel order.
pub fn build_feature_vector(trials: &[TrialWindow], mode: FeatureMode) -> Result<FeatureVector> {
    let first = trials
        .first()
        .ok_or_else(|| Error::ChannelMismatch("no channel windows".into()))?;
    let mut channels = Vec::with_capacity(trials.len());
    for t in trials {
        if t.task != first.task
            || t.trial_index != first.trial_index
            || t.subject_id != first.subject_id
            || t.fs != first.fs
            || t.samples.len() != first.samples.len()
        {
            return Err(Error::ChannelMismatch(format!(
                "window for `{}` is not from the same trial as `{}`",
                t.channel, first.channel
            )));
        }
        if channels.contains(&t.channel) {
            return Err(Error::ChannelMismatch(format!("channel `{}` repeated", t.channel)));
        }
        channels.push(t.channel.clone());
    }
    let mut values = Vec::with_capacity(trials.len() * mode.per_channel());
    for t in trials {
        if matches!(mode, FeatureMode::Fft | FeatureMode::Combined) {
            values.extend(band_powers_fft(t)?.to_array());
        }
        if matches!(mode, FeatureMode::Dwt | FeatureMode::Combined) {
            values.extend(dwt_features(t)?);
        }
    }
    FeatureVector::new(values, feature_schema(&channels, mode), first.task)
}

/// Splits every session into trials and builds one vector per trial. All
/// sessions must share the same channel list.
pub fn extract_features(
    sessions: &[SubjectSession],
    mode: FeatureMode,
    duration: TrialDuration,
) -> Result<Vec<FeatureVector>> {
    let Some(first) = sessions.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for s in sessions {
        if s.channels() != first.channels() {
            return Err(Error::ChannelMismatch(format!(
                "session `{}` channels {:?} differ from {:?}",
                s.subject_id(),
                s.channels(),
                first.channels()
            )));
        }
        for group in group_by_trial(split_into_trials(s, duration)?) {
            out.push(build_feature_vector(&group, mode)?);
        }
    }
    Ok(out)
}
