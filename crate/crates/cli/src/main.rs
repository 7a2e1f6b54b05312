//! `driveguard` command-line front end.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "driveguard", version, about = "Single-electrode EEG distraction detection toolkit")]
pub struct Cli {
    /// TOML file of default values; flags and DRIVEGUARD_* variables override it.
    #[arg(long, global = true, env = "DRIVEGUARD_CONFIG")]
    pub config: Option<PathBuf>,

    /// Seed for every stochastic component.
    #[arg(long, global = true, env = "DRIVEGUARD_SEED")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// Trial length in seconds, 3 to 5.
    #[arg(long, env = "DRIVEGUARD_TRIAL_SECONDS")]
    pub trial_seconds: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a session (CSV + manifest, or a raw packet capture).
    Ingest {
        /// Session CSV, or a `.bin` packet capture.
        input: PathBuf,
        /// Manifest JSON; defaults to the CSV path with a `.json` extension.
        manifest: Option<PathBuf>,
        /// Write the validated session (CSV + manifest) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Subject id for packet captures.
        #[arg(long, default_value = "S01")]
        subject: String,
        /// Task label for packet captures.
        #[arg(long, default_value = "Base")]
        task: String,
        #[command(flatten)]
        trial: TrialArgs,
    },
    /// Extract per-trial feature vectors and write ARFF.
    Features {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
        /// fft, dwt or combined.
        #[arg(long, env = "DRIVEGUARD_MODE")]
        mode: Option<String>,
        #[command(flatten)]
        trial: TrialArgs,
        /// Output ARFF path; stdout when absent.
        #[arg(long)]
        arff: Option<PathBuf>,
        #[arg(long, default_value = "driveguard")]
        relation: String,
    },
    /// Stratified k-fold evaluation of a classifier.
    TrainEval {
        /// One ARFF file, or session CSVs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// gnb or mlp.
        #[arg(long, env = "DRIVEGUARD_CLASSIFIER")]
        classifier: Option<String>,
        /// two or five.
        #[arg(long, env = "DRIVEGUARD_CLASSES")]
        classes: Option<String>,
        /// Number of folds.
        #[arg(long, env = "DRIVEGUARD_FOLDS")]
        k: Option<usize>,
        /// Feature mode when reading sessions.
        #[arg(long, env = "DRIVEGUARD_MODE")]
        mode: Option<String>,
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Distraction index per trial and task ranking.
    Index {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
        /// Channel to use; FC5 or the first channel by default.
        #[arg(long, env = "DRIVEGUARD_CHANNEL")]
        channel: Option<String>,
        #[command(flatten)]
        trial: TrialArgs,
        /// Directory for trials.csv, ranking.csv and ranking.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hypothesis tests on the bundled DI tables.
    Stats {
        #[arg(long, value_enum, default_value = "all")]
        fixtures: Fixtures,
        /// Family significance level.
        #[arg(long, env = "DRIVEGUARD_ALPHA")]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Short-time spectrum of one channel.
    Spectrogram {
        session: PathBuf,
        #[arg(long, env = "DRIVEGUARD_CHANNEL")]
        channel: Option<String>,
        /// Window length, seconds.
        #[arg(long)]
        window: Option<f64>,
        /// Fractional overlap in [0, 1).
        #[arg(long)]
        overlap: Option<f64>,
        /// Directory for spectrogram.csv and spectrogram_points.csv; grid on stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic sessions and packet captures.
    Synth {
        /// `default`, `headset`, or a JSON benchmark or single-session spec.
        #[arg(long, default_value = "default")]
        spec: String,
        /// Task separation for benchmark specs.
        #[arg(long, env = "DRIVEGUARD_EPSILON")]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-subject alert thresholds; Base sessions are the negatives.
    Calibrate {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
        #[arg(long)]
        subject: Option<String>,
        #[command(flatten)]
        detector: DetectorArgs,
        #[arg(long)]
        max_candidates: Option<usize>,
        /// Profile output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the online detector; alerts are printed as JSON lines.
    Stream {
        /// `.bin` packet capture or session CSV.
        input: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, env = "DRIVEGUARD_CHANNEL")]
        channel: Option<String>,
        /// Write the per-hop band power trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Analysis window, seconds.
    #[arg(long, env = "DRIVEGUARD_WINDOW")]
    pub window: Option<f64>,
    /// Evaluation hop, seconds.
    #[arg(long, env = "DRIVEGUARD_HOP")]
    pub hop: Option<f64>,
    /// Minimum gap between alerts, seconds.
    #[arg(long, env = "DRIVEGUARD_REFRACTORY")]
    pub refractory: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixtures {
    Table5,
    Table6,
    All,
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<driveguard::Error>())
        .map_or_else(
            || {
                if err.chain().any(|e| e.is::<std::io::Error>()) {
                    "io"
                } else {
                    "invalid_input"
                }
            },
            |e| e.kind(),
        )
}

/// Context chain joined with `: `, skipping causes already quoted by the
/// message above them.
fn error_message(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DRIVEGUARD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match commands::run(cli, &mut out).and_then(|()| out.flush().map_err(Into::into)) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream reader went away, e.g. `| head`
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(error_kind(&e), &error_message(&e)));
            ExitCode::FAILURE
        }
    }
}
