use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::json;

use driveguard::arff::{read_arff, write_arff};
use driveguard::classify::{kfold_evaluate, ClassifierSpec, Dataset, EvalReport, MlpConfig, Problem, DEFAULT_FOLDS};
use driveguard::dsp::spectrum::stft_spectrogram;
use driveguard::dsp::{band_powers_fft, extract_features};
use driveguard::index::{distraction_index, rank_tasks};
use driveguard::model::{
    dataset_summary, split_into_trials, FeatureMode, FeatureVector, SubjectSession, TaskLabel, TrialDuration,
};
use driveguard::protocol::{decode_stream, scalp_microvolts, ParserState};
use driveguard::session_io::{read_session, read_session_auto, write_session, Manifest};
use driveguard::stats::{table5_report, table6_reports, TestReport, FAMILY_ALPHA};
use driveguard::stream::{
    calibrate_thresholds, evaluate_profile, CalibrationProfile, DetectorState, GridSpec, Replay, DEFAULT_HOP_S,
    DEFAULT_REFRACTORY_S, DEFAULT_WINDOW_S,
};
use driveguard::synth::{generate_benchmark_suite, generate_session, session_packets, BenchmarkSpec, GeneratorSpec};
use driveguard::model::EegSample;

use crate::config::{pick, Config};
use crate::{Cli, Command, DetectorArgs, Fixtures, Format, TrialArgs};

/// Packets are fed to the parser in chunks of this many bytes.
const PACKET_CHUNK: usize = 4096;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let seed = pick(cli.seed, cfg.seed, 0);
    match cli.command {
        Command::Ingest {
            input,
            manifest,
            out: dir,
            subject,
            task,
            trial,
        } => ingest(&input, manifest.as_deref(), dir.as_deref(), &subject, &task, duration(&trial, &cfg)?, out),
        Command::Features {
            sessions,
            mode,
            trial,
            arff,
            relation,
        } => {
            let sessions = load_sessions(&sessions)?;
            let mode = feature_mode(mode, &cfg)?;
            let dur = duration(&trial, &cfg)?;
            let vectors = extract_features(&sessions, mode, dur)?;
            let text = write_arff(&vectors, &relation)?;
            match arff {
                Some(path) => {
                    write_file(&path, &text)?;
                    write!(out, "{}", dataset_summary(&sessions, dur).to_csv())?;
                    log::info!("{} vectors written to {}", vectors.len(), path.display());
                }
                None => write!(out, "{text}")?,
            }
            Ok(())
        }
        Command::TrainEval {
            inputs,
            classifier,
            classes,
            k,
            mode,
            trial,
            epochs,
            learning_rate,
            momentum,
            hidden,
            format,
            json,
        } => {
            let vectors = load_vectors(&inputs, feature_mode(mode, &cfg)?, duration(&trial, &cfg)?)?;
            let problem: Problem = pick(classes, cfg.classes.clone(), "two".into()).parse()?;
            let defaults = MlpConfig::default();
            let mlp = MlpConfig {
                hidden: hidden.or(cfg.hidden),
                learning_rate: pick(learning_rate, cfg.learning_rate, defaults.learning_rate),
                momentum: pick(momentum, cfg.momentum, defaults.momentum),
                epochs: pick(epochs, cfg.epochs, defaults.epochs),
                seed,
            };
            let spec = match pick(classifier, cfg.classifier.clone(), "gnb".into()).as_str() {
                "gnb" => ClassifierSpec::Gnb,
                "mlp" => ClassifierSpec::Mlp(mlp),
                other => bail!(driveguard::Error::Parameter(format!("unknown classifier `{other}`"))),
            };
            let k = pick(k, cfg.folds, DEFAULT_FOLDS);
            train_eval(&vectors, problem, &spec, k, seed, format, json.as_deref(), out)
        }
        Command::Index {
            sessions,
            channel,
            trial,
            out: dir,
        } => index(&load_sessions(&sessions)?, channel.or(cfg.channel.clone()), duration(&trial, &cfg)?, dir.as_deref(), out),
        Command::Stats { fixtures, alpha, format } => stats(fixtures, pick(alpha, cfg.alpha, FAMILY_ALPHA), format, out),
        Command::Spectrogram {
            session,
            channel,
            window,
            overlap,
            out: dir,
        } => {
            let s = read_session_auto(&session)?;
            let ch = channel_index(&s, channel.or(cfg.channel.clone()).as_deref())?;
            let uv: Vec<f64> = s.samples()[ch].iter().map(|&r| scalp_microvolts(f64::from(r))).collect();
            let spec = stft_spectrogram(
                &uv,
                s.fs(),
                pick(window, cfg.spectrogram_window, 1.0),
                pick(overlap, cfg.spectrogram_overlap, 0.5),
            )?;
            match dir {
                Some(dir) => {
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    write_file(&dir.join("spectrogram.csv"), &spec.to_csv_grid())?;
                    write_file(&dir.join("spectrogram_points.csv"), &spec.to_plot_triples())?;
                    writeln!(out, "{} frames x {} bins written to {}", spec.times.len(), spec.freqs.len(), dir.display())?;
                }
                None => write!(out, "{}", spec.to_csv_grid())?,
            }
            Ok(())
        }
        Command::Synth { spec, epsilon, out: dir } => {
            synth(&spec, cli.seed.or(cfg.seed), epsilon.or(cfg.epsilon), &dir, out)
        }
        Command::Calibrate {
            sessions,
            subject,
            detector,
            max_candidates,
            out: path,
        } => {
            let sessions = load_sessions(&sessions)?;
            let (base, distraction): (Vec<_>, Vec<_>) =
                sessions.into_iter().partition(|s| s.task() == TaskLabel::Base);
            let subject = subject
                .or_else(|| base.first().map(|s| s.subject_id().to_string()))
                .unwrap_or_else(|| "subject".into());
            let (window_s, hop_s, refractory_s) = detector_timing(&detector, &cfg);
            let grid = GridSpec {
                max_candidates: pick(max_candidates, cfg.max_candidates, GridSpec::default().max_candidates),
                window_s,
                hop_s,
                refractory_s,
            };
            let profile = calibrate_thresholds(&subject, &base, &distraction, &grid)?;
            log::info!("training window F1 {:.4}", evaluate_profile(&profile, &base, &distraction)?);
            let text = serde_json::to_string_pretty(&profile)? + "\n";
            match path {
                Some(p) => write_file(&p, &text)?,
                None => write!(out, "{text}")?,
            }
            Ok(())
        }
        Command::Stream {
            input,
            profile,
            channel,
            trace,
        } => stream(&input, &profile, channel.or(cfg.channel.clone()).as_deref(), trace.as_deref(), out),
    }
}

fn duration(trial: &TrialArgs, cfg: &Config) -> Result<TrialDuration> {
    Ok(TrialDuration::new(pick(trial.trial_seconds, cfg.trial_seconds, TrialDuration::default().seconds()))?)
}

fn feature_mode(flag: Option<String>, cfg: &Config) -> Result<FeatureMode> {
    Ok(pick(flag, cfg.mode.clone(), "fft".into()).parse()?)
}

fn detector_timing(args: &DetectorArgs, cfg: &Config) -> (f64, f64, f64) {
    (
        pick(args.window, cfg.window, DEFAULT_WINDOW_S),
        pick(args.hop, cfg.hop, DEFAULT_HOP_S),
        pick(args.refractory, cfg.refractory, DEFAULT_REFRACTORY_S),
    )
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_sessions(paths: &[PathBuf]) -> Result<Vec<SubjectSession>> {
    paths.iter().map(|p| Ok(read_session_auto(p)?)).collect()
}

fn is_packet_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Named channel, else FC5, else the first.
fn channel_index(s: &SubjectSession, name: Option<&str>) -> Result<usize> {
    match name {
        Some(n) => s
            .channels()
            .iter()
            .position(|c| c == n)
            .ok_or_else(|| driveguard::Error::MissingColumn(n.to_string()).into()),
        None => Ok(s.channels().iter().position(|c| c == "FC5").unwrap_or(0)),
    }
}

/// Raw samples carried by a packet capture, plus the corrupt frame count.
fn decode_packets(path: &Path) -> Result<(Vec<i16>, u64)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut state = ParserState::new();
    let mut raw = Vec::new();
    for chunk in bytes.chunks(PACKET_CHUNK) {
        raw.extend(decode_stream(chunk, &mut state).packets.into_iter().filter_map(|p| p.raw_value));
    }
    Ok((raw, state.corrupt_total))
}

fn ingest(
    input: &Path,
    manifest: Option<&Path>,
    dir: Option<&Path>,
    subject: &str,
    task: &str,
    dur: TrialDuration,
    out: &mut dyn Write,
) -> Result<()> {
    let mut corrupt = None;
    let session = if is_packet_file(input) {
        let (raw, bad) = decode_packets(input)?;
        corrupt = Some(bad);
        SubjectSession::single_electrode(subject, task.parse()?, raw)?
    } else {
        match manifest {
            Some(m) => read_session(input, m)?,
            None => read_session_auto(input)?,
        }
    };
    let manifest = Manifest::for_session(&session);
    let mut summary = json!({
        "subject_id": manifest.subject_id,
        "task": manifest.task,
        "device": manifest.device,
        "fs_hz": manifest.fs_hz,
        "channels": manifest.channels,
        "samples": session.len(),
        "duration_s": session.duration(),
        "trial_seconds": dur.seconds(),
        "trials": session.len() / dur.samples(session.fs()),
    });
    if let Some(bad) = corrupt {
        summary["corrupt_frames"] = bad.into();
    }
    if let Some(dir) = dir {
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
        let path = write_session(&session, dir, stem)?;
        summary["stored"] = path.display().to_string().into();
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn load_vectors(inputs: &[PathBuf], mode: FeatureMode, dur: TrialDuration) -> Result<Vec<FeatureVector>> {
    if let [single] = inputs {
        if single.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff")) {
            let text = fs::read_to_string(single).with_context(|| format!("reading {}", single.display()))?;
            return Ok(read_arff(&text)?.vectors);
        }
    }
    Ok(extract_features(&load_sessions(inputs)?, mode, dur)?)
}

#[allow(clippy::too_many_arguments)]
fn train_eval(
    vectors: &[FeatureVector],
    problem: Problem,
    spec: &ClassifierSpec,
    k: usize,
    seed: u64,
    format: Format,
    json_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let data = Dataset::from_vectors(vectors, problem)?;
    let report = kfold_evaluate(&data, k, spec, seed)?;
    let doc = json!({
        "classifier": spec.name(),
        "classes": data.classes,
        "folds": k,
        "seed": seed,
        "overall": report.overall,
        "per_fold": report.folds,
    });
    if let Some(p) = json_path {
        write_file(p, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?,
        Format::Text => {
            let r = &report.overall;
            writeln!(out, "{} | {}-fold | {} instances | seed {seed}", spec.name(), k, r.instances)?;
            writeln!(out, "{}", EvalReport::table_header())?;
            writeln!(out, "{}", r.table_row())?;
            writeln!(out, "\nconfusion (rows = truth, columns = predicted)")?;
            writeln!(out, "{:>12} {}", "", r.classes.iter().map(|c| format!("{c:>10}")).collect::<String>())?;
            for (c, row) in r.classes.iter().zip(&r.confusion) {
                writeln!(out, "{c:>12} {}", row.iter().map(|v| format!("{v:>10}")).collect::<String>())?;
            }
        }
    }
    Ok(())
}

fn index(
    sessions: &[SubjectSession],
    channel: Option<String>,
    dur: TrialDuration,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut rows = String::from("subject,task,channel,trial,delta,theta,alpha,beta,gamma,di\n");
    let mut trials = Vec::new();
    for s in sessions {
        let ch = &s.channels()[channel_index(s, channel.as_deref())?];
        for t in split_into_trials(s, dur)?.into_iter().filter(|t| &t.channel == ch) {
            let bp = band_powers_fft(&t)?;
            let di = distraction_index(&bp)?.value();
            rows.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                t.subject_id, t.task, t.channel, t.trial_index, bp.delta, bp.theta, bp.alpha, bp.beta, bp.gamma, di
            ));
            trials.push((t.task, bp));
        }
    }
    let ranking = rank_tasks(&trials)?;
    if ranking.has_ties() {
        log::warn!("tied task means: {:?}", ranking.ties);
    }
    if let Some(dir) = dir {
        write_file(&dir.join("trials.csv"), &rows)?;
        write_file(&dir.join("ranking.csv"), &ranking.to_csv())?;
        write_file(&dir.join("ranking.json"), &(serde_json::to_string_pretty(&ranking)? + "\n"))?;
    }
    write!(out, "{}", ranking.to_csv())?;
    Ok(())
}

fn stats(fixtures: Fixtures, alpha: f64, format: Format, out: &mut dyn Write) -> Result<()> {
    let mut doc = serde_json::Map::new();
    let mut lines = Vec::new();
    if matches!(fixtures, Fixtures::Table5 | Fixtures::All) {
        let r = table5_report(alpha)?;
        lines.push(format!("Table 5 baseline vs distraction DI\n  W={} p={:.4e}\n  {}", r.statistic, r.p_value, r.summary()));
        doc.insert("table5".into(), serde_json::to_value(&r)?);
    }
    if matches!(fixtures, Fixtures::Table6 | Fixtures::All) {
        let t6 = table6_reports(alpha)?;
        let friedman: TestReport = t6.friedman?;
        let mut text = format!("Table 6 electrodes across activities\n  {}", friedman.summary());
        let mut posthoc = Vec::new();
        for o in &t6.posthoc {
            match &o.result {
                Ok(r) => {
                    text += &format!("\n  {}: {}", o.name, r.summary());
                    posthoc.push(json!({ "pair": o.name, "report": r }));
                }
                Err(e) => {
                    text += &format!("\n  {}: {e}", o.name);
                    posthoc.push(json!({ "pair": o.name, "error": e.kind(), "message": e.to_string() }));
                }
            }
        }
        lines.push(text);
        doc.insert("table6".into(), json!({ "friedman": friedman, "posthoc": posthoc }));
    }
    match format {
        Format::Text => writeln!(out, "{}", lines.join("\n\n"))?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?,
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SynthSpec {
    Benchmark(BenchmarkSpec),
    Session(GeneratorSpec),
}

fn synth(spec: &str, seed: Option<u64>, epsilon: Option<f64>, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let parsed = match spec {
        "default" => SynthSpec::Benchmark(BenchmarkSpec::default()),
        "headset" => SynthSpec::Benchmark(BenchmarkSpec::headset(0)),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading spec {path}"))?;
            serde_json::from_str(&text).map_err(|e| driveguard::Error::Parse {
                path: path.into(),
                message: format!("not a benchmark or session spec: {e}"),
            })?
        }
    };
    let (sessions, resolved) = match parsed {
        SynthSpec::Benchmark(mut b) => {
            b.seed = seed.unwrap_or(b.seed);
            b.epsilon = epsilon.unwrap_or(b.epsilon);
            (generate_benchmark_suite(&b)?, serde_json::to_value(&b)?)
        }
        SynthSpec::Session(mut g) => {
            g.seed = seed.unwrap_or(g.seed);
            (vec![generate_session(&g)?], serde_json::to_value(&g)?)
        }
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut index = Vec::new();
    for s in &sessions {
        let stem = format!("{}_{}", s.subject_id(), s.task());
        let csv = write_session(s, dir, &stem)?;
        let mut entry = json!({ "subject_id": s.subject_id(), "task": s.task(), "csv": csv.file_name().and_then(|n| n.to_str()) });
        if s.channels().len() == 1 {
            let bin = dir.join(format!("{stem}.bin"));
            fs::write(&bin, session_packets(s)).with_context(|| format!("writing {}", bin.display()))?;
            entry["packets"] = format!("{stem}.bin").into();
        }
        index.push(entry);
    }
    let suite = json!({ "spec": resolved, "sessions": index });
    write_file(&dir.join("suite.json"), &(serde_json::to_string_pretty(&suite)? + "\n"))?;
    writeln!(out, "{} sessions written to {}", sessions.len(), dir.display())?;
    Ok(())
}

fn stream(input: &Path, profile: &Path, channel: Option<&str>, trace: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(profile).with_context(|| format!("reading {}", profile.display()))?;
    let profile: CalibrationProfile = serde_json::from_str(&text).map_err(|e| driveguard::Error::Parse {
        path: profile.into(),
        message: e.to_string(),
    })?;
    let (raw, fs_hz, corrupt) = if is_packet_file(input) {
        let (raw, bad) = decode_packets(input)?;
        (raw, driveguard::model::Device::SingleElectrode512.fs(), bad)
    } else {
        let s = read_session_auto(input)?;
        let ch = channel_index(&s, channel)?;
        (s.samples()[ch].clone(), s.fs(), 0)
    };
    let mut state = DetectorState::new(profile, fs_hz)?;
    state.note_corrupt(corrupt);
    let mut replay = Replay::default();
    for (i, &r) in raw.iter().enumerate() {
        let (row, alert) = state.process_sample(EegSample { t: i as f64 / fs_hz, raw: r })?;
        if let Some(a) = alert {
            writeln!(out, "{}", serde_json::to_string(&a)?)?;
            replay.alerts.push(a);
        }
        replay.trace.extend(row);
    }
    if let Some(p) = trace {
        write_file(p, &replay.trace_csv())?;
    }
    log::info!(
        "{} samples, {} windows, {} alerts, {} corrupt frames",
        state.samples_seen(),
        replay.trace.len(),
        replay.alerts.len(),
        state.corrupt_packets()
    );
    Ok(())
}
