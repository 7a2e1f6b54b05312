//! Session files: a CSV of `t_s,raw[,raw_ch2,...]` rows plus a JSON
//! manifest carrying subject, task, rate, device and channel names.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Device, SubjectSession, TaskLabel};
use crate::protocol::{RAW_MAX, RAW_MIN};

/// Timestamp tolerance against `i / fs`, seconds.
pub const TIME_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subject_id: String,
    pub task: String,
    pub fs_hz: f64,
    pub device: String,
    pub channels: Vec<String>,
}

impl Manifest {
    pub fn for_session(session: &SubjectSession) -> Self {
        Self {
            subject_id: session.subject_id().to_string(),
            task: session.task().to_string(),
            fs_hz: session.fs(),
            device: session.device().as_str().to_string(),
            channels: session.channels().to_vec(),
        }
    }
}

/// Manifest path paired with a session CSV: same stem, `.json` extension.
pub fn manifest_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads and validates a session.
pub fn read_session(csv_path: &Path, manifest_path: &Path) -> Result<SubjectSession> {
    let manifest = read_manifest(manifest_path)?;
    let task: TaskLabel = manifest.task.parse()?;
    let device: Device = manifest.device.parse()?;
    if (manifest.fs_hz - device.fs()).abs() > 1e-9 {
        return Err(Error::SampleRateMismatch(format!(
            "manifest fs {} Hz but device {} runs at {} Hz",
            manifest.fs_hz,
            device.as_str(),
            device.fs()
        )));
    }
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let (t, samples) = parse_csv(file, csv_path, manifest.channels.len())?;
    check_timestamps(&t, manifest.fs_hz)?;
    SubjectSession::new(manifest.subject_id, device, task, manifest.channels, samples)
}

/// Reads a session whose manifest sits next to the CSV.
pub fn read_session_auto(csv_path: &Path) -> Result<SubjectSession> {
    read_session(csv_path, &manifest_path_for(csv_path))
}

fn parse_csv<R: std::io::Read>(
    reader: R,
    path: &Path,
    n_channels: usize,
) -> Result<(Vec<f64>, Vec<Vec<i16>>)> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.get(0).map(str::trim) != Some("t_s") {
        return Err(Error::MissingColumn("t_s".into()));
    }
    if headers.len() < 2 || headers.get(1).map(str::trim) != Some("raw") {
        return Err(Error::MissingColumn("raw".into()));
    }
    if headers.len() - 1 != n_channels {
        return Err(Error::MissingColumn(format!(
            "manifest lists {n_channels} channels but CSV has {} sample columns",
            headers.len() - 1
        )));
    }
    let mut t = Vec::new();
    let mut samples = vec![Vec::new(); n_channels];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let line = row + 2;
        let field = |i: usize| {
            record
                .get(i)
                .map(str::trim)
                .ok_or_else(|| parse_err(format!("line {line}: missing field {i}")))
        };
        t.push(
            field(0)?
                .parse::<f64>()
                .map_err(|e| parse_err(format!("line {line}: t_s: {e}")))?,
        );
        for (ch, stream) in samples.iter_mut().enumerate() {
            let v: i32 = field(ch + 1)?
                .parse()
                .map_err(|e| parse_err(format!("line {line}: raw: {e}")))?;
            if !(RAW_MIN..=RAW_MAX).contains(&v) {
                return Err(Error::OutOfRange {
                    value: v.into(),
                    min: RAW_MIN.into(),
                    max: RAW_MAX.into(),
                });
            }
            stream.push(v as i16);
        }
    }
    Ok((t, samples))
}

fn check_timestamps(t: &[f64], fs: f64) -> Result<()> {
    let Some(&t0) = t.first() else {
        return Ok(());
    };
    if t0 < 0.0 || !t0.is_finite() {
        return Err(Error::InvalidSession(format!("first timestamp {t0} is negative")));
    }
    for (i, &ti) in t.iter().enumerate() {
        let expected = t0 + i as f64 / fs;
        if (ti - expected).abs() > TIME_TOLERANCE {
            return Err(Error::SampleRateMismatch(format!(
                "row {} has t={ti} s, expected {expected} s at {fs} Hz",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Renders the session CSV with `t = i / fs`.
pub fn session_csv(session: &SubjectSession) -> String {
    let mut out = String::with_capacity(session.len() * 16);
    out.push_str("t_s,raw");
    for i in 2..=session.channels().len() {
        out.push_str(&format!(",raw_ch{i}"));
    }
    out.push('\n');
    let fs = session.fs();
    for i in 0..session.len() {
        out.push_str(&format!("{}", i as f64 / fs));
        for stream in session.samples() {
            out.push_str(&format!(",{}", stream[i]));
        }
        out.push('\n');
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`, returning the CSV path.
pub fn write_session(session: &SubjectSession, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = manifest_path_for(&csv_path);
    let mut f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    f.write_all(session_csv(session).as_bytes())
        .map_err(|e| Error::io(&csv_path, e))?;
    let manifest = serde_json::to_string_pretty(&Manifest::for_session(session))
        .expect("manifest serializes");
    fs::write(&json_path, manifest + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(csv_path)
}
