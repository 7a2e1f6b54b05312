//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use driveguard::arff::write_arff;
use driveguard::classify::{kfold_evaluate, ClassifierSpec, Dataset, MlpConfig, MlpModel, Problem, DEFAULT_FOLDS};
use driveguard::dsp::wavelet::{dwt_db8, idwt_db8, max_level, Extension};
use driveguard::dsp::{band_powers, band_powers_fft, extract_features, Band};
use driveguard::index::{distraction_index, rank_tasks};
use driveguard::model::{split_into_trials, BandPowers, FeatureMode, SubjectSession, TaskLabel, TrialDuration};
use driveguard::protocol::{decode_stream, encode_packet, ParserState};
use driveguard::stats::{table5, table5_report, table6, table6_reports, FAMILY_ALPHA};
use driveguard::stream::{
    calibrate_thresholds, evaluate_profile, replay_session, stream_samples, BandThresholds, CalibrationProfile,
    GridSpec,
};
use driveguard::synth::{
    generate_benchmark_suite, generate_session, graded_theta_suite, BenchmarkSpec, BurstSpec, GeneratorSpec,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- statistics ----

/// Tie-aware midranks, written independently of the library.
fn oracle_midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Friedman with replicates as the treatment sum of squares over the
/// pooled rank variance measured directly from the ranked data.
fn oracle_friedman(rows: &[Vec<f64>], reps: usize) -> f64 {
    let k = rows[0].len();
    let blocks = rows.len() / reps;
    let mut ranks = vec![vec![0.0; k]; rows.len()];
    for b in 0..blocks {
        let flat: Vec<f64> = rows[b * reps..(b + 1) * reps].iter().flatten().copied().collect();
        for (i, r) in oracle_midranks(&flat).into_iter().enumerate() {
            ranks[b * reps + i / k][i % k] = r;
        }
    }
    let all: Vec<f64> = ranks.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let ss_cols: f64 = (0..k)
        .map(|j| {
            let m = ranks.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            rows.len() as f64 * (m - grand).powi(2)
        })
        .sum();
    let ss_total: f64 = all.iter().map(|r| (r - grand).powi(2)).sum();
    let variance = ss_total / (blocks * (k * reps - 1)) as f64;
    ss_cols / variance
}

fn statistics() -> Check {
    let t5 = table5_report(FAMILY_ALPHA).map_err(|e| e.to_string())?;
    ensure(t5.statistic == 0.0, || format!("Table 5 W = {}", t5.statistic))?;
    ensure((t5.p_value - 6.1035e-5).abs() <= 1e-9, || format!("Table 5 p = {:e}", t5.p_value))?;
    ensure(table5().subjects.len() == 15, || "Table 5 fixture size".into())?;

    let t6 = table6_reports(FAMILY_ALPHA).map_err(|e| e.to_string())?;
    let fr = t6.friedman.map_err(|e| e.to_string())?;
    let fixture = table6();
    let oracle = oracle_friedman(&fixture.values, fixture.replicates());
    ensure((fr.statistic - oracle).abs() <= 1e-9 * oracle, || {
        format!("Friedman {} disagrees with oracle {}", fr.statistic, oracle)
    })?;
    ensure((fr.statistic - 34.54).abs() <= 0.5, || format!("Friedman statistic {}", fr.statistic))?;
    ensure(fr.df == Some(13), || format!("Friedman df {:?}", fr.df))?;

    let expected = [("FC5-FC6", 2.9733, 0.0015), ("FC5-O1", 2.6630, 0.0039), ("FC5-O2", 2.4562, 0.0070)];
    let mut detail = Vec::new();
    for (name, z, p) in expected {
        let out = t6
            .posthoc
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| format!("missing post-hoc pair {name}"))?;
        let r = out.result.as_ref().map_err(|e| e.to_string())?;
        let got_z = r.z_value.ok_or_else(|| format!("{name}: no z value"))?;
        ensure((got_z - z).abs() <= 0.05, || format!("{name}: z {got_z} vs {z}"))?;
        ensure((r.p_value - p).abs() <= 0.001, || format!("{name}: p {} vs {p}", r.p_value))?;
        detail.push(format!("{name} z={got_z:.4} p={:.4}", r.p_value));
    }
    Ok(format!(
        "W=0 p={:.4e}; chi2={:.4} df=13 (oracle {:.4}); {}",
        t5.p_value,
        fr.statistic,
        oracle,
        detail.join(", ")
    ))
}

// ---- classification ----

fn subject_accuracies(suite: &[SubjectSession], problem: Problem, classifier: &ClassifierSpec) -> Check {
    let mut acc = Vec::new();
    for subject in suite.chunks(5) {
        let vectors =
            extract_features(subject, FeatureMode::Fft, TrialDuration::default()).map_err(|e| e.to_string())?;
        let data = Dataset::from_vectors(&vectors, problem).map_err(|e| e.to_string())?;
        let report = kfold_evaluate(&data, DEFAULT_FOLDS, classifier, 1).map_err(|e| e.to_string())?;
        acc.push(report.overall.accuracy_pct);
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    Ok(format!("{mean:.2}"))
}

fn classification() -> Check {
    let classifiers = [ClassifierSpec::Gnb, ClassifierSpec::Mlp(MlpConfig::default())];
    let large = generate_benchmark_suite(&BenchmarkSpec {
        seed: 2024,
        epsilon: 3.0,
        ..BenchmarkSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let flat = generate_benchmark_suite(&BenchmarkSpec {
        seed: 2024,
        epsilon: 0.0,
        ..BenchmarkSpec::default()
    })
    .map_err(|e| e.to_string())?;
    ensure(large.len() == 25, || format!("{} sessions", large.len()))?;
    let mut detail = Vec::new();
    for c in &classifiers {
        let two: f64 = subject_accuracies(&large, Problem::Two, c)?.parse().unwrap();
        let five: f64 = subject_accuracies(&large, Problem::Five, c)?.parse().unwrap();
        let chance: f64 = subject_accuracies(&flat, Problem::Five, c)?.parse().unwrap();
        let line = format!("{}: two={two:.2}% five={five:.2}% five@eps0={chance:.2}%", c.name());
        ensure(two >= 95.0 && five >= 70.0 && (chance - 20.0).abs() <= 5.0, || line.clone())?;
        detail.push(line);
    }
    Ok(detail.join("; "))
}

// ---- numerics ----

fn numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_pr = 0.0f64;
    let mut worst_energy = 0.0f64;
    for n in [64usize, 100, 256, 512, 2048] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let energy = norm * norm;
        for level in 1..=max_level(n) {
            for ext in [Extension::Symmetric, Extension::Periodic] {
                if ext == Extension::Periodic && n % (1 << level) != 0 {
                    continue;
                }
                let dec = dwt_db8(&x, level, ext).map_err(|e| e.to_string())?;
                let y = idwt_db8(&dec);
                let err = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm;
                worst_pr = worst_pr.max(err);
                if ext == Extension::Periodic {
                    worst_energy = worst_energy.max((dec.energy() - energy).abs() / energy);
                }
            }
        }
    }
    ensure(worst_pr <= 1e-9, || format!("reconstruction error {worst_pr:e}"))?;
    ensure(worst_energy <= 1e-9, || format!("energy error {worst_energy:e}"))?;

    let mut worst_grad = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (f, h, c) = (rng.random_range(1..8), rng.random_range(1..8), rng.random_range(2..6));
        let mut model = MlpModel::initialize(f, h, c, &mut rng);
        let p: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        model.set_params(&p);
        let z: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..c);
        let t: Vec<f64> = (0..c).map(|k| f64::from(u8::from(k == label))).collect();
        let (_, grad) = model.loss_and_gradient(&z, &t);
        let numeric: Vec<f64> = (0..p.len())
            .map(|i| {
                let eps = 1e-6;
                let mut q = p.clone();
                q[i] += eps;
                model.set_params(&q);
                let up = model.loss_and_gradient(&z, &t).0;
                q[i] -= 2.0 * eps;
                model.set_params(&q);
                let down = model.loss_and_gradient(&z, &t).0;
                (up - down) / (2.0 * eps)
            })
            .collect();
        let diff = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grad.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst_grad = worst_grad.max(diff / scale.max(1e-12));
    }
    ensure(worst_grad <= 1e-4, || format!("gradient error {worst_grad:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut correct = 0;
    for _ in 0..50 {
        let band = Band::ALL[rng.random_range(0..5)];
        let def = band.definition();
        let f = rng.random_range(def.lo + 0.5..def.hi - 0.5);
        let amp = rng.random_range(5.0..50.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let x: Vec<f64> =
            (0..2048).map(|i| amp * (std::f64::consts::TAU * f * i as f64 / 512.0 + phase).sin()).collect();
        let bp = band_powers(&x, 512.0).map_err(|e| e.to_string())?.to_array();
        let arg = (0..5).max_by(|&a, &b| bp[a].total_cmp(&bp[b])).unwrap();
        correct += usize::from(Band::ALL[arg] == band);
    }
    ensure(correct == 50, || format!("{correct}/50 tones in band"))?;
    Ok(format!(
        "reconstruction {worst_pr:.1e}, energy {worst_energy:.1e}, gradient {worst_grad:.1e}, tones 50/50"
    ))
}

// ---- distraction index ----

fn distraction() -> Check {
    let equal = distraction_index(&BandPowers::from_array([2.5; 5])).map_err(|e| e.to_string())?.value();
    ensure(equal == 3.0, || format!("DI(equal) = {equal}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let bp = BandPowers::from_array(std::array::from_fn(|_| rng.random_range(0.01..100.0)));
        let k = 10f64.powf(rng.random_range(-6.0..6.0));
        let a = distraction_index(&bp).unwrap().value();
        let b = distraction_index(&bp.scaled(k)).unwrap().value();
        worst = worst.max((a - b).abs() / a);
    }
    ensure(worst <= 1e-12, || format!("scaling error {worst:e}"))?;

    for seed in 0..20u64 {
        let mut order = TaskLabel::DISTRACTIONS.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let sessions = graded_theta_suite(seed, &order, 25, 4.0).map_err(|e| e.to_string())?;
        let mut trials = Vec::new();
        for s in &sessions {
            for t in split_into_trials(s, TrialDuration::default()).map_err(|e| e.to_string())? {
                trials.push((s.task(), band_powers_fft(&t).map_err(|e| e.to_string())?));
            }
        }
        let ranking = rank_tasks(&trials).map_err(|e| e.to_string())?;
        ensure(ranking.order() == order, || format!("seed {seed}: {:?} vs {:?}", ranking.order(), order))?;
    }
    Ok(format!("DI(equal)=3, scaling error {worst:.1e}, graded ranking 20/20 seeds"))
}

// ---- streaming ----

fn bursty(seed: u64) -> SubjectSession {
    let mut spec = GeneratorSpec::base(seed, 30.0);
    spec.bursts.push(BurstSpec {
        band: Band::Beta,
        center_hz: 22.0,
        rate_hz: 0.3,
        duration_s: 1.5,
        gain: 2.0,
    });
    generate_session(&spec).unwrap()
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

fn streaming() -> Check {
    let mut alerts = 0;
    let mut violations = 0;
    for seed in 0..100u64 {
        let s = bursty(seed);
        let mut p = CalibrationProfile::disabled("fuzz");
        p.refractory_s = 1.0 + (seed % 10) as f64;
        p.thresholds = BandThresholds {
            beta: 0.5 + 0.05 * (seed % 40) as f64,
            ..BandThresholds::disabled()
        };
        if seed % 3 == 0 {
            p.di_threshold = 2.5;
        }
        let batch = replay_session(&s, &p).map_err(|e| e.to_string())?;
        let streamed = stream_samples(s.timestamped(0), &p, 512.0).map_err(|e| e.to_string())?;
        ensure(streamed == batch, || format!("seed {seed}: stream and batch differ"))?;
        violations += batch.alerts.windows(2).filter(|w| w[1].t - w[0].t < p.refractory_s - 1e-9).count();
        alerts += batch.alerts.len();
    }
    ensure(violations == 0, || format!("{violations} refractory violations"))?;
    ensure(alerts > 100, || format!("only {alerts} alerts in corpus"))?;

    let (base, text) = separable_pair(100);
    let profile = calibrate_thresholds("s", &[base], &[text], &GridSpec::default()).map_err(|e| e.to_string())?;
    let (b2, t2) = separable_pair(200);
    let f1 = evaluate_profile(&profile, &[b2], &[t2]).map_err(|e| e.to_string())?;
    ensure(f1 == 1.0, || format!("held-out F1 {f1}"))?;
    Ok(format!("100/100 sessions equivalent, {alerts} alerts, 0 refractory violations, held-out F1=1"))
}

// ---- parser ----

fn parser() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut bytes = Vec::new();
    let mut expected = Vec::new();
    let mut corrupted = 0;
    for _ in 0..100_000 {
        let raw = rng.random_range(-2048..=2047);
        let mut frame = encode_packet(raw).map_err(|e| e.to_string())?;
        if rng.random_bool(0.05) {
            let k = rng.random_range(3..frame.len());
            frame[k] ^= rng.random_range(1..=255u8);
            corrupted += 1;
        } else {
            expected.push(raw as i16);
        }
        bytes.extend(frame);
        if rng.random_bool(0.05) {
            let junk = rng.random_range(1..12);
            bytes.extend((0..junk).map(|_| rng.random::<u8>()));
        }
    }
    let mut state = ParserState::new();
    let mut packets = Vec::new();
    let mut start = 0;
    while start < bytes.len() {
        let end = (start + rng.random_range(1..64)).min(bytes.len());
        packets.extend(decode_stream(&bytes[start..end], &mut state).packets);
        start = end;
    }
    let invalid = packets.iter().filter(|p| !p.checksum_valid).count();
    ensure(invalid == 0, || format!("{invalid} invalid packets"))?;
    // every intact frame must come out, in order
    let mut it = packets.iter().filter_map(|p| p.raw_value);
    let recovered = expected.iter().take_while(|&&v| it.by_ref().any(|x| x == v)).count();
    ensure(recovered == expected.len(), || format!("recovered {recovered} of {}", expected.len()))?;
    Ok(format!(
        "{} intact frames recovered, {corrupted} corrupted, {} corrupt frames flagged",
        expected.len(),
        state.corrupt_total
    ))
}

// ---- formats ----

fn formats() -> Check {
    let render = || -> std::result::Result<String, String> {
        let spec = BenchmarkSpec {
            trials_per_task: 2,
            subjects: 1,
            ..BenchmarkSpec::headset(8)
        };
        let suite = generate_benchmark_suite(&spec).map_err(|e| e.to_string())?;
        let vectors =
            extract_features(&suite, FeatureMode::Fft, TrialDuration::default()).map_err(|e| e.to_string())?;
        write_arff(&vectors, "headset").map_err(|e| e.to_string())
    };
    let a = render()?;
    let b = render()?;
    let attributes = a.lines().filter(|l| l.to_ascii_lowercase().starts_with("@attribute")).count();
    ensure(attributes == 71, || format!("{attributes} attribute lines"))?;
    ensure(a == b, || "two runs differ".into())?;
    Ok(format!("71 attribute lines, {} bytes identical across runs", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("statistics golden values", Duration::from_secs(5), statistics),
        ("synthetic classification", Duration::from_secs(120), classification),
        ("numerical properties", Duration::from_secs(30), numerics),
        ("distraction index", Duration::from_secs(10), distraction),
        ("streaming alerts", Duration::from_secs(60), streaming),
        ("packet parser fuzz", Duration::from_secs(10), parser),
        ("ARFF format", Duration::from_secs(60), formats),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > limit => Err(format!("{d}; took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs())),
            other => other,
        };
        match outcome {
            Ok(d) => println!("PASS  {name} ({:.2} s): {d}", elapsed.as_secs_f64()),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name} ({:.2} s): {d}", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
