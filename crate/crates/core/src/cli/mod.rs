//! Command-line front end: a TOML config in, data files and audit reports out.
//!
//! Exit codes: 0 every audit passes, 1 some audit fails (reports are still
//! written), 2 configuration or output-path error, 3 numerical failure.

mod config;
mod pipeline;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{
    load_config, parse_config, Artifact, AuditSection, ConfigError, Family, InitialCondition, Outputs, ParsedConfig,
    RunConfig, SubstituteSection, SystemSection, Thresholds, Tolerances,
};
pub use pipeline::{run_pipeline, RunError, RunOutcome, Verb};
pub use report::{emit_report, render_json_lines, render_text, write_csv, write_series, OutputError, ReportFormat};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SUBHAM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "subham-out";

#[derive(Debug, Parser)]
#[command(name = "subham", version, about = "Substitute conservative systems for damped mechanics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the dissipative system and write the trajectory.
    Simulate(RunArgs),
    /// Also reconstruct restricted forces and work potentials.
    Reconstruct(RunArgs),
    /// Also audit the shared curve and the substitute Hamiltonian.
    Verify(RunArgs),
    /// Reconstruct and compare phase-volume behaviour of both flows.
    VolumeAudit(RunArgs),
    /// Every stage and every audit.
    All(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Reject unknown config keys instead of warning.
    #[arg(long)]
    pub strict: bool,
}

impl Command {
    fn split(&self) -> (Verb, &RunArgs) {
        match self {
            Command::Simulate(a) => (Verb::Simulate, a),
            Command::Reconstruct(a) => (Verb::Reconstruct, a),
            Command::Verify(a) => (Verb::Verify, a),
            Command::VolumeAudit(a) => (Verb::VolumeAudit, a),
            Command::All(a) => (Verb::All, a),
        }
    }
}

/// `--out`, then the environment, then `outputs.dir`, then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag_or_env: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag_or_env.or_else(|| cfg.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Parse arguments, run, print a summary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (verb, args) = cli.command.split();
    let parsed = match load_config(&args.config, args.strict) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for k in &parsed.unknown_keys {
        eprintln!("warning: unknown config key `{k}` ignored (use --strict to reject)");
    }
    let out = resolve_out_dir(args.out.clone(), &parsed.config);
    match run_pipeline(&parsed.config, verb, &out) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{} {}", if r.pass() { "PASS" } else { "FAIL" }, r.name());
                for m in r.failures() {
                    println!("     {} = {:e} (bound {:?})", m.name, m.value, m.bound);
                }
            }
            println!("wrote {} files to {}", outcome.files.len(), out.display());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
