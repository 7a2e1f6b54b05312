//! Canonical EEG bands, single-window periodogram band powers and
//! Hann-windowed STFT spectrograms.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandPowers, TrialWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    pub fn definition(self) -> BandDefinition {
        BANDS[self as usize]
    }

    pub fn of(self, bp: &BandPowers) -> f64 {
        bp.to_array()[self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub band: Band,
    pub lo: f64,
    pub hi: f64,
}

impl BandDefinition {
    /// `lo <= f < hi`; the gamma band also includes its upper edge.
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && (f < self.hi || (self.band == Band::Gamma && f == self.hi))
    }
}

pub const BANDS: [BandDefinition; 5] = [
    BandDefinition { band: Band::Delta, lo: 1.0, hi: 4.0 },
    BandDefinition { band: Band::Theta, lo: 4.0, hi: 8.0 },
    BandDefinition { band: Band::Alpha, lo: 8.0, hi: 12.0 },
    BandDefinition { band: Band::Beta, lo: 12.0, hi: 30.0 },
    BandDefinition { band: Band::Gamma, lo: 30.0, hi: 40.0 },
];

/// One-sided power spectral density of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

fn forward_fft(buf: &mut [Complex<f64>]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// `|X_k|^2` folded to a one-sided density, scaled by `1 / (fs * norm)`.
fn one_sided(spectrum: &[Complex<f64>], fs: f64, norm: f64) -> Psd {
    let n = spectrum.len();
    let bins = n / 2 + 1;
    let mut power = Vec::with_capacity(bins);
    for (k, c) in spectrum.iter().take(bins).enumerate() {
        let mut p = c.norm_sqr() / (fs * norm);
        if k != 0 && !(n.is_multiple_of(2) && k == n / 2) {
            p *= 2.0;
        }
        power.push(p);
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / n as f64).collect();
    Psd { freqs, power }
}

/// Rectangular-window periodogram of the mean-removed signal over its full
/// length.
pub fn periodogram(signal: &[f64], fs: f64) -> Psd {
    let n = signal.len();
    if n == 0 {
        return Psd { freqs: Vec::new(), power: Vec::new() };
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    forward_fft(&mut buf);
    one_sided(&buf, fs, n as f64)
}

/// Mean PSD over the bins each canonical band contains.
pub fn band_means(psd: &Psd) -> BandPowers {
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for (&f, &p) in psd.freqs.iter().zip(&psd.power) {
        for (i, def) in BANDS.iter().enumerate() {
            if def.contains(f) {
                sums[i] += p;
                counts[i] += 1;
            }
        }
    }
    let mut out = [0.0; 5];
    for i in 0..5 {
        if counts[i] > 0 {
            out[i] = sums[i] / counts[i] as f64;
        }
    }
    BandPowers::from_array(out)
}

/// Band powers of a microvolt signal. Needs at least two seconds of data.
pub fn band_powers(signal_uv: &[f64], fs: f64) -> Result<BandPowers> {
    let required = (2.0 * fs).ceil() as usize;
    if signal_uv.len() < required {
        return Err(Error::Resolution {
            samples: signal_uv.len(),
            required,
        });
    }
    Ok(band_means(&periodogram(signal_uv, fs)))
}

/// Band powers of a trial, µV²/Hz.
pub fn band_powers_fft(trial: &TrialWindow) -> Result<BandPowers> {
    band_powers(&trial.microvolts(), trial.fs)
}

/// Floor applied to spectrogram cells, dB.
pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Frame centers, seconds.
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `power[frame][bin]`, dB.
    pub power_db: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// CSV grid: header `t_s,<f0>,<f1>,...`, one row per frame.
    pub fn to_csv_grid(&self) -> String {
        let mut out = String::from("t_s");
        for f in &self.freqs {
            out.push_str(&format!(",{f}"));
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.power_db) {
            out.push_str(&format!("{t}"));
            for v in row {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out
    }

    /// Long-form plot data, `freq_hz,t_s,db` triples.
    pub fn to_plot_triples(&self) -> String {
        let mut out = String::from("freq_hz,t_s,db\n");
        for (t, row) in self.times.iter().zip(&self.power_db) {
            for (f, v) in self.freqs.iter().zip(row) {
                out.push_str(&format!("{f},{t},{v:.4}\n"));
            }
        }
        out
    }

    /// Index of the strongest bin in each frame.
    pub fn ridge(&self) -> Vec<usize> {
        self.power_db
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Linear-power STFT frames (one-sided PSD per frame) and their centers.
pub(crate) fn stft_frames(
    signal: &[f64],
    fs: f64,
    window_s: f64,
    overlap: f64,
) -> Result<(Vec<f64>, Vec<Psd>)> {
    let n = (window_s * fs).round() as usize;
    if !(window_s.is_finite() && n >= 64) {
        return Err(Error::Parameter(format!(
            "window of {window_s} s is {n} samples; need at least 64"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap {overlap} outside [0, 1)")));
    }
    if signal.len() < n {
        return Err(Error::Parameter(format!(
            "signal of {} samples shorter than one {n}-sample window",
            signal.len()
        )));
    }
    let hop = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window = hann(n);
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut times = Vec::new();
    let mut frames = Vec::new();
    let mut start = 0;
    while start + n <= signal.len() {
        let seg = &signal[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .zip(&window)
            .map(|(&x, &w)| Complex::new((x - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        frames.push(one_sided(&buf, fs, norm));
        times.push((start as f64 + n as f64 / 2.0) / fs);
        start += hop;
    }
    Ok((times, frames))
}

/// Hann-windowed, overlapping STFT in dB. Silent cells clamp to
/// [`DB_FLOOR`].
pub fn stft_spectrogram(signal: &[f64], fs: f64, window_s: f64, overlap: f64) -> Result<Spectrogram> {
    let (times, frames) = stft_frames(signal, fs, window_s, overlap)?;
    let freqs = frames[0].freqs.clone();
    let power_db = frames
        .iter()
        .map(|psd| {
            psd.power
                .iter()
                .map(|&p| if p > 0.0 { (10.0 * p.log10()).max(DB_FLOOR) } else { DB_FLOOR })
                .collect()
        })
        .collect();
    Ok(Spectrogram { times, freqs, power_db })
}
