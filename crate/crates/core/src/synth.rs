//! Seeded synthetic EEG: pink-noise carrier plus Hann-enveloped tone
//! bursts at Poisson onsets, quantized to ADC counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::Band;
use crate::error::{Error, Result};
use crate::model::{Device, SubjectSession, TaskLabel};
use crate::protocol::{encode_packet, scalp_microvolts, RAW_MAX, RAW_MIN};

/// Largest tolerated fraction of clipped samples.
pub const MAX_CLIP_FRACTION: f64 = 0.01;
/// Lowest frequency carrying pink-noise power, Hz.
pub const NOISE_FLOOR_HZ: f64 = 0.5;

/// One-sided `1/f^exponent` spectrum scaled to an RMS amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Expected RMS, µV.
    pub amplitude_uv: f64,
    pub exponent: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            amplitude_uv: 20.0,
            exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    pub band: Band,
    pub center_hz: f64,
    /// Mean onsets per second.
    pub rate_hz: f64,
    pub duration_s: f64,
    /// Peak amplitude relative to the noise RMS.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub subject_id: String,
    pub task: TaskLabel,
    pub device: Device,
    pub channels: Vec<String>,
    pub duration_s: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub bursts: Vec<BurstSpec>,
}

impl GeneratorSpec {
    /// Single FC5 electrode at 512 Hz, no bursts.
    pub fn base(seed: u64, duration_s: f64) -> Self {
        Self {
            seed,
            subject_id: "synth".into(),
            task: TaskLabel::Base,
            device: Device::SingleElectrode512,
            channels: vec!["FC5".into()],
            duration_s,
            noise: NoiseSpec::default(),
            bursts: Vec::new(),
        }
    }

    pub fn fs(&self) -> f64 {
        self.device.fs()
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.fs()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise.amplitude_uv > 0.0) || !self.noise.exponent.is_finite() {
            return Err(Error::Parameter("noise amplitude must be positive".into()));
        }
        if !(self.duration_s >= 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Parameter(format!("duration {}", self.duration_s)));
        }
        if self.channels.is_empty() {
            return Err(Error::Parameter("no channels".into()));
        }
        for b in &self.bursts {
            let def = b.band.definition();
            if !(1.0..=40.0).contains(&b.center_hz) || !def.contains(b.center_hz) {
                return Err(Error::Parameter(format!(
                    "burst at {} Hz outside the {} band",
                    b.center_hz,
                    b.band.name()
                )));
            }
            if !(b.gain > 0.0) || !(b.rate_hz > 0.0) || !(b.duration_s > 0.0) {
                return Err(Error::Parameter("burst gain, rate and duration must be positive".into()));
            }
            if b.center_hz >= self.fs() / 2.0 {
                return Err(Error::Parameter(format!("burst at {} Hz above Nyquist", b.center_hz)));
            }
        }
        Ok(())
    }
}

/// Scale `A` of the one-sided PSD `A / f^p` over bins `k * fs / n` with
/// `f >= NOISE_FLOOR_HZ`, chosen so the bins integrate to `amplitude^2`.
pub fn pink_scale(noise: &NoiseSpec, fs: f64, n: usize) -> f64 {
    let df = fs / n as f64;
    let total: f64 = (1..n.div_ceil(2))
        .map(|k| k as f64 * df)
        .filter(|&f| f >= NOISE_FLOOR_HZ)
        .map(|f| f.powf(-noise.exponent) * df)
        .sum();
    if total == 0.0 {
        0.0
    } else {
        noise.amplitude_uv.powi(2) / total
    }
}

/// Expected one-sided PSD of the generated carrier at `f`, µV²/Hz.
pub fn pink_psd(noise: &NoiseSpec, fs: f64, n: usize, f: f64) -> f64 {
    if f < NOISE_FLOOR_HZ {
        0.0
    } else {
        pink_scale(noise, fs, n) * f.powf(-noise.exponent)
    }
}

/// White-noise PSD of rounding to ADC counts, µV²/Hz.
pub fn quantization_psd(fs: f64) -> f64 {
    let q = scalp_microvolts(1.0);
    q * q / 12.0 / (fs / 2.0)
}

/// Gaussian coloured noise with the spectrum of [`pink_psd`], µV.
pub fn pink_noise(noise: &NoiseSpec, fs: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let scale = pink_scale(noise, fs, n);
    let df = fs / n as f64;
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    // strictly positive frequencies below Nyquist; their mirrors keep x real
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * df;
        if f < NOISE_FLOOR_HZ {
            continue;
        }
        let sigma = (scale * f.powf(-noise.exponent) * fs * n as f64 / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let c = Complex::new(re, im) * (sigma / std::f64::consts::SQRT_2);
        spec[k] = c;
        spec[n - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

/// Onset times of a Poisson process on `[0, duration)`.
pub fn poisson_onsets(rate_hz: f64, duration_s: f64, rng: &mut impl Rng) -> Vec<f64> {
    let exp = Exp::new(rate_hz).expect("positive rate");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration_s {
            return out;
        }
        out.push(t);
    }
}

/// Adds a Hann-enveloped tone of `peak` µV starting at `onset`.
fn add_burst(signal: &mut [f64], fs: f64, onset: f64, duration: f64, freq: f64, phase: f64, peak: f64) {
    let start = (onset * fs).round() as usize;
    let len = (duration * fs).round() as usize;
    for i in 0..len {
        let Some(x) = signal.get_mut(start + i) else {
            break;
        };
        let env = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos();
        let t = i as f64 / fs;
        *x += peak * env * (2.0 * std::f64::consts::PI * freq * t + phase).sin();
    }
}

/// Rounds µV to ADC counts, clamping; errors when too many samples clip.
pub fn quantize(signal_uv: &[f64]) -> Result<Vec<i16>> {
    let per_count = scalp_microvolts(1.0);
    let mut clipped = 0;
    let out = signal_uv
        .iter()
        .map(|&v| {
            let c = (v / per_count).round();
            if c < RAW_MIN as f64 || c > RAW_MAX as f64 {
                clipped += 1;
            }
            c.clamp(RAW_MIN as f64, RAW_MAX as f64) as i16
        })
        .collect();
    if clipped as f64 > MAX_CLIP_FRACTION * signal_uv.len() as f64 {
        return Err(Error::Clipping {
            clipped,
            total: signal_uv.len(),
        });
    }
    Ok(out)
}

/// Generates a session. Bursts share onsets across channels; noise is
/// independent per channel.
pub fn generate_session(spec: &GeneratorSpec) -> Result<SubjectSession> {
    spec.validate()?;
    let fs = spec.fs();
    let n = spec.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut burst_layer = vec![0.0; n];
    for b in &spec.bursts {
        for onset in poisson_onsets(b.rate_hz, spec.duration_s, &mut rng) {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let peak = b.gain * spec.noise.amplitude_uv;
            add_burst(&mut burst_layer, fs, onset, b.duration_s, b.center_hz, phase, peak);
        }
    }
    let mut channels = Vec::with_capacity(spec.channels.len());
    for _ in &spec.channels {
        let mut x = pink_noise(&spec.noise, fs, n, &mut rng);
        for (xi, bi) in x.iter_mut().zip(&burst_layer) {
            *xi += bi;
        }
        channels.push(quantize(&x)?);
    }
    SubjectSession::new(
        spec.subject_id.clone(),
        spec.device,
        spec.task,
        spec.channels.clone(),
        channels,
    )
}

/// One framed packet per sample of the first channel.
pub fn session_packets(session: &SubjectSession) -> Vec<u8> {
    let mut out = Vec::with_capacity(session.len() * 8);
    if let Some(ch) = session.samples().first() {
        for &raw in ch {
            out.extend(encode_packet(raw as i32).expect("i16 from a session is in range"));
        }
    }
    out
}

/// The 14 headset electrodes in montage order.
pub const HEADSET_CHANNELS: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

/// Signature band of each distraction task in the benchmark.
pub fn signature_band(task: TaskLabel) -> Option<Band> {
    match task {
        TaskLabel::Base => None,
        TaskLabel::Read => Some(Band::Theta),
        TaskLabel::Call => Some(Band::Alpha),
        TaskLabel::Text => Some(Band::Beta),
        TaskLabel::Snapshot => Some(Band::Gamma),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub subjects: usize,
    pub trials_per_task: usize,
    pub trial_seconds: f64,
    /// Task separation: burst gain multiplier, 0 makes tasks identical.
    pub epsilon: f64,
    pub device: Device,
    pub channels: Vec<String>,
    pub noise: NoiseSpec,
}

pub const DEFAULT_EPSILON: f64 = 1.5;

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            subjects: 5,
            trials_per_task: 25,
            trial_seconds: 4.0,
            epsilon: DEFAULT_EPSILON,
            device: Device::SingleElectrode512,
            channels: vec!["FC5".into()],
            noise: NoiseSpec::default(),
        }
    }
}

impl BenchmarkSpec {
    /// The 14-electrode headset at 128 Hz.
    pub fn headset(seed: u64) -> Self {
        Self {
            seed,
            device: Device::MultiElectrode128,
            channels: HEADSET_CHANNELS.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }
}

/// SplitMix64 step, used to derive independent per-session seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-subject task signatures: centre frequency drawn inside the
/// signature band, gain jittered around `epsilon`.
fn subject_bursts(spec: &BenchmarkSpec, subject: usize, task: TaskLabel) -> Vec<BurstSpec> {
    let Some(band) = signature_band(task) else {
        return Vec::new();
    };
    if spec.epsilon <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 + subject as u64, 100 + task.index() as u64));
    let def = band.definition();
    let hi = def.hi.min(spec.device.fs() / 2.0 - 4.0);
    let lo = def.lo + 0.25 * (hi - def.lo);
    let hi = hi - 0.25 * (hi - def.lo);
    vec![BurstSpec {
        band,
        center_hz: rng.random_range(lo..=hi),
        rate_hz: 2.0,
        duration_s: 0.5,
        gain: spec.epsilon * rng.random_range(0.8..=1.2),
    }]
}

/// `subjects x 5` sessions, each holding `trials_per_task` trials of its
/// task, in subject-major, task-enum order.
pub fn generate_benchmark_suite(spec: &BenchmarkSpec) -> Result<Vec<SubjectSession>> {
    let jobs: Vec<(usize, TaskLabel)> = (0..spec.subjects)
        .flat_map(|s| TaskLabel::ALL.into_iter().map(move |t| (s, t)))
        .collect();
    jobs.par_iter()
        .map(|&(subject, task)| {
            generate_session(&GeneratorSpec {
                seed: derive_seed(spec.seed, 1 + subject as u64, task.index() as u64),
                subject_id: format!("S{:02}", subject + 1),
                task,
                device: spec.device,
                channels: spec.channels.clone(),
                duration_s: spec.trials_per_task as f64 * spec.trial_seconds,
                noise: spec.noise,
                bursts: subject_bursts(spec, subject, task),
            })
        })
        .collect()
}

/// Sessions whose distraction index grows with position: `order[0]` gets
/// the strongest theta bursts, the last entry the weakest, Base none.
pub fn graded_theta_suite(
    seed: u64,
    order: &[TaskLabel],
    trials: usize,
    trial_seconds: f64,
) -> Result<Vec<SubjectSession>> {
    let mut sessions = Vec::new();
    let tasks = std::iter::once(TaskLabel::Base).chain(order.iter().copied());
    for (i, task) in tasks.enumerate() {
        let rank = order.iter().position(|&t| t == task);
        let bursts = match rank {
            Some(r) => vec![BurstSpec {
                band: Band::Theta,
                center_hz: 5.5,
                rate_hz: 3.0,
                duration_s: 1.0,
                gain: 0.5 * (order.len() - r) as f64,
            }],
            None => Vec::new(),
        };
        sessions.push(generate_session(&GeneratorSpec {
            seed: derive_seed(seed, 7, i as u64),
            subject_id: "graded".into(),
            task,
            bursts,
            ..GeneratorSpec::base(0, trials as f64 * trial_seconds)
        })?);
    }
    Ok(sessions)
}
