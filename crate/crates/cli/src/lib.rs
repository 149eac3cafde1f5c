//! Command-line runner: parses an experiment config, runs it, and writes
//! CSV tables, JSON artifacts and a manifest into an output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use descent_core::harness::{run_experiment, ExperimentKind, ExperimentOutput, ExperimentSpec};
use descent_core::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "descent", version, about = "Run energy-descent experiments and audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Alternating minimization trace on a random quadratic pair
    AimTrace(RunArgs),
    /// Apollonian descent-region raster
    RasterS(RunArgs),
    /// Similarity-region raster
    RasterT(RunArgs),
    /// Per-layer energy of a stack over many samples
    EnergyCurves(RunArgs),
    /// Conditional-descent audit over randomized stacks
    Audit(RunArgs),
    /// Finite-difference check of the stack backward pass
    GradCheck(RunArgs),
    /// SGD on the synthetic task
    Train(RunArgs),
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Command::AimTrace(_) => ExperimentKind::AimTrace,
            Command::RasterS(_) => ExperimentKind::RasterS,
            Command::RasterT(_) => ExperimentKind::RasterT,
            Command::EnergyCurves(_) => ExperimentKind::EnergyCurves,
            Command::Audit(_) => ExperimentKind::Audit,
            Command::GradCheck(_) => ExperimentKind::GradCheck,
            Command::Train(_) => ExperimentKind::Train,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::AimTrace(a)
            | Command::RasterS(a)
            | Command::RasterT(a)
            | Command::EnergyCurves(a)
            | Command::Audit(a)
            | Command::GradCheck(a)
            | Command::Train(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment spec (JSON)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides the seed in the config
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Raster resolution override
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_ASSERTION,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::Dimension(_) | Error::Domain(_) | Error::Precondition(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Reads the config and applies the seed precedence `--seed` > config > error.
pub fn load_spec(kind: ExperimentKind, args: &RunArgs) -> Result<(ExperimentSpec, u64), Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    if spec.kind != kind {
        return Err(Failure::Usage(format!(
            "config describes a {} run but the {} subcommand was given",
            spec.kind.name(),
            kind.name()
        )));
    }
    let seed = args
        .seed
        .or(spec.seed)
        .ok_or_else(|| Failure::Usage("no seed: pass --seed or set \"seed\" in the config".into()))?;
    // embedding paths are relative to the config file
    if let Some(Value::String(p)) = spec.parameters.get("embeddings") {
        let p = PathBuf::from(p);
        if p.is_relative() {
            let base = args.config.parent().unwrap_or(Path::new("."));
            spec.parameters["embeddings"] = json!(base.join(p).to_string_lossy());
        }
    }
    Ok((spec, seed))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_fail(path, e))
}

/// Writes every artifact and the manifest; returns the manifest.
pub fn write_outputs(
    out_dir: &Path,
    spec: &ExperimentSpec,
    seed: u64,
    grid: Option<usize>,
    output: &ExperimentOutput,
) -> Result<Value, Failure> {
    fs::create_dir_all(out_dir).map_err(|e| io_fail(out_dir, e))?;
    let mut artifacts = Vec::new();
    for (name, table) in &output.tables {
        let file = format!("{name}.csv");
        let bytes = table.to_csv_string()?.into_bytes();
        write_file(&out_dir.join(&file), &bytes)?;
        artifacts.push(json!({ "file": file, "sha256": sha256_hex(&bytes), "rows": table.len() }));
    }
    for (name, value) in &output.json {
        let file = format!("{name}.json");
        let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
        bytes.push(b'\n');
        write_file(&out_dir.join(&file), &bytes)?;
        artifacts.push(json!({ "file": file, "sha256": sha256_hex(&bytes) }));
    }
    let config = json!({
        "version": spec.version,
        "kind": spec.kind,
        "seed": seed,
        "parameters": output.resolved,
    });
    let manifest = json!({
        "kind": spec.kind.name(),
        "seed": seed,
        "grid": grid,
        "config": config,
        "artifacts": artifacts,
        "summary": output.summary,
        "assertions": output.assertions,
        "passed": output.passed(),
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(Error::from)?;
    bytes.push(b'\n');
    write_file(&out_dir.join("manifest.json"), &bytes)?;
    Ok(manifest)
}

/// Runs one invocation and returns its exit code. Diagnostics go to stderr.
pub fn execute(cli: &Cli) -> i32 {
    let args = cli.command.args();
    let result = (|| -> Result<ExperimentOutput, Failure> {
        let (spec, seed) = load_spec(cli.command.kind(), args)?;
        let output = run_experiment(&spec, seed, args.grid)?;
        write_outputs(&args.out, &spec, seed, args.grid, &output)?;
        Ok(output)
    })();
    match result {
        Ok(output) => {
            if !args.quiet {
                let mut stdout = std::io::stdout().lock();
                for a in &output.assertions {
                    let _ = writeln!(stdout, "{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
                }
            }
            for a in output.assertions.iter().filter(|a| !a.passed) {
                eprintln!("ERROR: assertion {} failed: {}", a.name, a.detail);
            }
            if output.passed() {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            }
        }
        Err(f) => {
            eprintln!("ERROR: {}", f.message());
            f.code()
        }
    }
}
