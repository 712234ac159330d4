use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

mod commands;

#[derive(Parser, Debug, Clone)]
#[command(name = "perigid", version, about = "Rigidity certificates for periodic frameworks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Sets rank, PSD and residual tolerances at once.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// RNG seed (default: $PERIGID_SEED, then a fixed value).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include assembled matrices in the report.
    #[arg(long, global = true)]
    pub emit_matrices: bool,
    /// Run the command on every `*.json` file in a directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub batch: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Counts, connectivity, gain rank and the full-rank condition.
    Info { file: Option<PathBuf> },
    /// Ranks of the incidence, rigidity and stress matrices.
    Rank { file: Option<PathBuf> },
    /// Basis of the equilibrium stresses.
    Stresses {
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "flexible")]
        mode: StressMode,
    },
    /// Super-stability certificate.
    Certify {
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "flexible")]
        mode: CertifyMode,
        /// Where the stress comes from; `auto` uses the file's weights when present.
        #[arg(long, value_enum, default_value = "auto")]
        stress: StressSource,
    },
    /// Randomized test of generic global rigidity.
    GenericTest {
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "flexible")]
        mode: GenericMode,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Unit-volume energy minimizer for the file's stress.
    Minimize {
        file: Option<PathBuf>,
        /// Write the minimizer as a framework file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Draw a window of the covering graph.
    Cover {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        window: u32,
        /// SVG output path; without it the SVG goes to stdout.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fold a finite framework into a periodic one.
    FromFinite {
        file: Option<PathBuf>,
        /// Vertex pairs `u:v`, comma separated, e.g. `0:4,2:6`.
        #[arg(long)]
        pairs: String,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// List or export the built-in examples.
    Fixtures {
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressMode {
    Flexible,
    Fixed,
    Volume,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifyMode {
    Flexible,
    Fixed,
    Volume,
    Spiderweb,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressSource {
    Auto,
    FromFile,
    Compute,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenericMode {
    Flexible,
    Fixed,
}

/// Exit status plus report.
pub struct Outcome {
    pub report: Value,
    pub code: u8,
    /// Raw payload printed instead of the report (SVG, framework files).
    pub raw: Option<String>,
}

impl Outcome {
    pub fn new(report: Value, code: u8) -> Self {
        Self { report, code, raw: None }
    }
}

pub fn error_code(e: &perigid::Error) -> u8 {
    use perigid::Error::*;
    match e {
        InternalInconsistency(_) | RankMismatch(_) | FormMismatch { .. } => 3,
        NotSpiderweb(_) | HypothesisFailed(_) => 1,
        _ => 2,
    }
}

fn text_summary(report: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = report {
        for (k, v) in map {
            match v {
                Value::String(s) => out.push_str(&format!("{k}: {s}\n")),
                Value::Number(_) | Value::Bool(_) | Value::Null => out.push_str(&format!("{k}: {v}\n")),
                _ => out.push_str(&format!("{k}: {}\n", serde_json::to_string(v).unwrap_or_default())),
            }
        }
    }
    out
}

fn render(cli: &Cli, outcome: &Outcome) -> String {
    if let Some(raw) = &outcome.raw {
        return raw.clone();
    }
    if cli.global.json {
        let mut s = serde_json::to_string_pretty(&outcome.report).expect("serializable report");
        s.push('\n');
        s
    } else {
        text_summary(&outcome.report)
    }
}

fn run_one(cli: &Cli, file: Option<&Path>) -> Outcome {
    match commands::dispatch(cli, file) {
        Ok(o) => o,
        Err(e) => {
            let code = error_code(&e);
            let mut m = Map::new();
            m.insert("error".into(), json!(e.to_string()));
            m.insert("exit_code".into(), json!(code));
            Outcome::new(Value::Object(m), code)
        }
    }
}

fn batch_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(dir) = &cli.global.batch {
        let files = match batch_files(dir) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", dir.display());
                return ExitCode::from(2);
            }
        };
        let outcomes: Vec<Outcome> = std::thread::scope(|s| {
            let handles: Vec<_> = files
                .iter()
                .map(|f| s.spawn(|| run_one(&cli, Some(f.as_path()))))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let code = outcomes.iter().map(|o| o.code).max().unwrap_or(0);
        if cli.global.json {
            let entries: Vec<Value> = files
                .iter()
                .zip(&outcomes)
                .map(|(f, o)| json!({ "file": f.display().to_string(), "exit_code": o.code, "report": o.report }))
                .collect();
            let mut s = serde_json::to_string_pretty(&json!({ "batch": entries })).expect("serializable");
            s.push('\n');
            print!("{s}");
        } else {
            for (f, o) in files.iter().zip(&outcomes) {
                print!("== {} (exit {})\n{}", f.display(), o.code, render(&cli, o));
            }
        }
        return ExitCode::from(code);
    }
    let outcome = run_one(&cli, None);
    match outcome.report.get("error").and_then(Value::as_str) {
        Some(msg) if !cli.global.json => eprintln!("error: {msg}"),
        _ => print!("{}", render(&cli, &outcome)),
    }
    ExitCode::from(outcome.code)
}
