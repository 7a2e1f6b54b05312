use driveguard::classify::{kfold_evaluate, Classifier, Dataset, Prediction, Predictor};
use driveguard::dsp::{band_powers, band_powers_fft, Band};
use driveguard::error::{Error, Result};
use driveguard::model::{split_into_trials, SubjectSession, TaskLabel, TrialDuration};
use driveguard::protocol::scalp_voltage;
use driveguard::session_io::{read_session_auto, write_session};
use driveguard::stream::{
    calibrate_thresholds, evaluate_profile, replay_session, BandThresholds, CalibrationProfile, GridSpec,
};
use driveguard::synth::{
    generate_benchmark_suite, generate_session, pink_psd, quantization_psd, signature_band, BenchmarkSpec,
    BurstSpec, GeneratorSpec,
};

fn uv(raw: &[i16]) -> Vec<f64> {
    raw.iter().map(|&r| scalp_voltage(r as f64) * 1e6).collect()
}

#[test]
fn synthetic_session_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = GeneratorSpec::base(9, 6.0);
    spec.task = TaskLabel::Call;
    let s = generate_session(&spec).unwrap();
    let csv = write_session(&s, dir.path(), "call").unwrap();
    assert_eq!(read_session_auto(&csv).unwrap(), s);
}

#[test]
fn base_beta_power_matches_generator_spectrum() {
    let spec = GeneratorSpec::base(4, 80.0);
    let s = generate_session(&spec).unwrap();
    let trials = split_into_trials(&s, TrialDuration::default()).unwrap();
    assert_eq!(trials.len(), 20);
    let beta: Vec<f64> = trials.iter().map(|t| band_powers_fft(t).unwrap().beta).collect();
    let mean = beta.iter().sum::<f64>() / beta.len() as f64;
    let sd = (beta.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (beta.len() - 1) as f64).sqrt();
    let sem = sd / (beta.len() as f64).sqrt();
    // analytic mean PSD over the 0.25 Hz bins of [12, 30)
    let bins: Vec<f64> = (48..120).map(|k| k as f64 * 0.25).collect();
    let n = spec.samples();
    let analytic = bins.iter().map(|&f| pink_psd(&spec.noise, 512.0, n, f)).sum::<f64>() / bins.len() as f64
        + quantization_psd(512.0);
    assert!((mean - analytic).abs() <= 3.0 * sem, "mean {mean}, analytic {analytic}, sem {sem}");
}

#[test]
fn beta_bursts_raise_high_band_power() {
    let base = generate_session(&GeneratorSpec::base(12, 80.0)).unwrap();
    let mut text = GeneratorSpec::base(13, 80.0);
    text.task = TaskLabel::Text;
    text.bursts.push(BurstSpec {
        band: Band::Beta,
        center_hz: 25.0,
        rate_hz: 1.0,
        duration_s: 0.5,
        gain: 1.0,
    });
    let text = generate_session(&text).unwrap();
    let high = |s: &SubjectSession| {
        let t = split_into_trials(s, TrialDuration::default()).unwrap();
        t.iter()
            .map(|w| {
                let p = band_powers_fft(w).unwrap();
                p.beta + p.gamma
            })
            .sum::<f64>()
            / t.len() as f64
    };
    assert!(high(&text) > high(&base));
}

#[test]
fn signature_bands_dominate_at_default_separation() {
    let suite = generate_benchmark_suite(&BenchmarkSpec::default()).unwrap();
    let (mut ok, mut total) = (0, 0);
    for subject in suite.chunks(5) {
        let base: Vec<_> = split_into_trials(&subject[0], TrialDuration::default())
            .unwrap()
            .iter()
            .map(|t| band_powers_fft(t).unwrap())
            .collect();
        for s in &subject[1..] {
            let band = signature_band(s.task()).unwrap();
            let ceiling = base.iter().map(|p| band.of(p)).fold(0.0, f64::max);
            for t in split_into_trials(s, TrialDuration::default()).unwrap() {
                total += 1;
                ok += usize::from(band.of(&band_powers_fft(&t).unwrap()) > ceiling);
            }
        }
    }
    assert!(ok as f64 >= 0.95 * total as f64, "{ok} of {total}");
}

#[test]
fn benchmark_is_deterministic() {
    let spec = BenchmarkSpec {
        subjects: 2,
        trials_per_task: 2,
        ..BenchmarkSpec::default()
    };
    assert_eq!(generate_benchmark_suite(&spec).unwrap(), generate_benchmark_suite(&spec).unwrap());
}

/// Predicts the training majority class.
struct Majority;

struct MajorityModel {
    label: usize,
    classes: usize,
}

impl Predictor for MajorityModel {
    fn predict(&self, _x: &[f64]) -> Result<Prediction> {
        let mut scores = vec![0.0; self.classes];
        scores[self.label] = 1.0;
        Ok(Prediction {
            label: self.label,
            scores,
        })
    }
}

impl Classifier for Majority {
    type Model = MajorityModel;

    fn fit(&self, data: &Dataset) -> Result<MajorityModel> {
        let counts = data.class_counts();
        let label = (0..counts.len()).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        Ok(MajorityModel {
            label,
            classes: data.n_classes(),
        })
    }
}

#[test]
fn cross_validation_matches_sequential_oracle() {
    let labels: Vec<usize> = (0..47).map(|i| (i * 7 % 11) % 3).collect();
    let features: Vec<Vec<f64>> = (0..47).map(|i| vec![i as f64]).collect();
    let data = Dataset::new(features, labels.clone(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let report = kfold_evaluate(&data, 5, &Majority, 17).unwrap();
    let mut confusion = vec![vec![0usize; 3]; 3];
    for (f, test) in report.plan.folds.iter().enumerate() {
        let train = report.plan.training(f);
        let mut counts = [0usize; 3];
        for &i in &train {
            counts[labels[i]] += 1;
        }
        let majority = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        for &i in test {
            confusion[labels[i]][majority] += 1;
        }
    }
    assert_eq!(report.overall.confusion, confusion);
    let again = kfold_evaluate(&data, 5, &Majority, 17).unwrap();
    assert_eq!(again.overall, report.overall);
}

fn separable_pair(seed: u64) -> (SubjectSession, SubjectSession) {
    let base = generate_session(&GeneratorSpec::base(seed, 40.0)).unwrap();
    let mut text = GeneratorSpec::base(seed + 1, 40.0);
    text.task = TaskLabel::Text;
    text.bursts.push(BurstSpec {
        band: Band::Beta,
        center_hz: 20.0,
        rate_hz: 2.0,
        duration_s: 0.5,
        gain: 3.0,
    });
    (base, generate_session(&text).unwrap())
}

#[test]
fn calibration_separates_held_out_session() {
    let (base, text) = separable_pair(100);
    let profile = calibrate_thresholds("s", &[base], &[text], &GridSpec::default()).unwrap();
    let (b2, t2) = separable_pair(200);
    assert_eq!(evaluate_profile(&profile, &[b2], &[t2]).unwrap(), 1.0);
}

#[test]
fn identical_sessions_fail_calibration() {
    let (base, _) = separable_pair(300);
    let same = base.clone().with_task(TaskLabel::Read);
    match calibrate_thresholds("s", &[base], &[same], &GridSpec::default()) {
        Err(Error::CalibrationFailed { best_f1 }) => assert!(best_f1 <= 2.0 / 3.0 + 1e-12),
        other => panic!("expected calibration failure, got {other:?}"),
    }
}

fn scaled(s: &SubjectSession, k: i16) -> SubjectSession {
    SubjectSession::single_electrode(s.subject_id(), s.task(), s.samples()[0].iter().map(|v| v * k).collect())
        .unwrap()
}

#[test]
fn scaling_sessions_scales_band_thresholds() {
    let (base, text) = separable_pair(400);
    let grid = GridSpec::default();
    let a = calibrate_thresholds("s", std::slice::from_ref(&base), std::slice::from_ref(&text), &grid).unwrap();
    let b = calibrate_thresholds("s", &[scaled(&base, 2)], &[scaled(&text, 2)], &grid).unwrap();
    for (x, y) in a.thresholds.to_array().iter().zip(b.thresholds.to_array()) {
        if x.is_finite() {
            assert!((y / x - 4.0).abs() < 1e-9);
        } else {
            assert!(y.is_infinite());
        }
    }
    assert_eq!(a.di_threshold.is_finite(), b.di_threshold.is_finite());
    if a.di_threshold.is_finite() {
        assert!((a.di_threshold - b.di_threshold).abs() <= 1e-9 * a.di_threshold);
    }
}

/// Base noise with a steady beta tone between 30 s and 35 s.
fn burst_session() -> SubjectSession {
    let base = generate_session(&GeneratorSpec::base(77, 60.0)).unwrap();
    let raw: Vec<i16> = base.samples()[0]
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let t = i as f64 / 512.0;
            let tone = if (30.0..35.0).contains(&t) {
                (300.0 * (std::f64::consts::TAU * 20.0 * t).sin()).round() as i16
            } else {
                0
            };
            r + tone
        })
        .collect();
    SubjectSession::single_electrode("b", TaskLabel::Text, raw).unwrap()
}

fn beta_profile(threshold: f64) -> CalibrationProfile {
    CalibrationProfile {
        thresholds: BandThresholds {
            beta: threshold,
            ..BandThresholds::disabled()
        },
        ..CalibrationProfile::disabled("b")
    }
}

#[test]
fn quiet_noise_raises_no_alert() {
    let s = generate_session(&GeneratorSpec::base(78, 60.0)).unwrap();
    let trace = replay_session(&s, &CalibrationProfile::disabled("q")).unwrap().trace;
    let ceiling = trace.iter().map(|r| r.powers.beta).fold(0.0, f64::max);
    let r = replay_session(&s, &beta_profile(ceiling * 1.01)).unwrap();
    assert!(r.alerts.is_empty());
}

#[test]
fn beta_burst_alerts_once() {
    let s = burst_session();
    // offline oracle: beta power over every hop window
    let raw = &s.samples()[0];
    let mut quiet = 0.0f64;
    let mut loud = 0.0f64;
    for end in (2048..=raw.len()).step_by(512) {
        let beta = band_powers(&uv(&raw[end - 2048..end]), 512.0).unwrap().beta;
        let t = (end - 1) as f64 / 512.0;
        if !(30.0..40.0).contains(&t) {
            quiet = quiet.max(beta);
        } else if (32.0..=35.0).contains(&t) {
            loud = loud.max(beta);
        }
    }
    assert!(loud > 10.0 * quiet);
    let r = replay_session(&s, &beta_profile(2.0 * quiet)).unwrap();
    assert_eq!(r.alerts.len(), 1, "{:?}", r.alerts.iter().map(|a| a.t).collect::<Vec<_>>());
    let a = &r.alerts[0];
    assert!((30.0..35.0).contains(&a.t), "alert at {}", a.t);
    assert_eq!(a.triggers, vec!["beta"]);
}

#[test]
fn severity_equals_offline_index() {
    let s = burst_session();
    let mut p = CalibrationProfile::disabled("b");
    p.di_threshold = 0.1;
    p.refractory_s = 1.0;
    let r = replay_session(&s, &p).unwrap();
    assert!(!r.alerts.is_empty());
    let raw = &s.samples()[0];
    for a in &r.alerts {
        let end = (a.t * 512.0).round() as usize + 1;
        let bp = band_powers(&uv(&raw[end - 2048..end]), 512.0).unwrap();
        let di = bp.theta / bp.alpha + bp.alpha / bp.beta + bp.beta / bp.gamma;
        assert!((a.severity.unwrap() - di).abs() <= 1e-9 * di);
    }
}
