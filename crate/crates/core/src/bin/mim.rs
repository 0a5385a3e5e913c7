use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mim_core::cli::{self, emit_report, CliError, TaskKind, EXIT_CONFIG};

/// Run an inspection, walking, POD or maintenance scenario and write its report.
#[derive(Parser)]
#[command(name = "mim", version)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for point clouds (XYZ) and thermal frames (CSV).
    #[arg(long, global = true)]
    export_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Plan viewpoints over an ORU or the structure and inspect them.
    Inspect,
    /// Plan and replay a walk to a fixture.
    Walk,
    /// Run a probability-of-detection campaign.
    Pod,
    /// Run a list of tool actions.
    Maintain,
    /// Run whatever task the scenario holds.
    Report,
}

impl Command {
    fn accepts(self, kind: TaskKind) -> bool {
        match self {
            Command::Report => true,
            Command::Inspect => kind == TaskKind::Inspect,
            Command::Walk => kind == TaskKind::Walk,
            Command::Pod => kind == TaskKind::Pod,
            Command::Maintain => kind == TaskKind::Maintain,
        }
    }
}

fn execute(args: &Args) -> Result<i32, CliError> {
    let path = args
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("--scenario is required".into()))?;
    let loaded = cli::Scenario::load(path)?;
    let kind = loaded.scenario.task.kind();
    if !args.command.accepts(kind) {
        return Err(CliError::Config(format!(
            "scenario holds a {kind:?} task; use that subcommand or `report`"
        )));
    }
    let output = cli::run(&loaded, args.seed)?;
    match &args.out {
        Some(p) => emit_report(&output.report, p)?,
        None => std::io::stdout()
            .write_all(output.report.to_json().as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    if let Some(dir) = &args.export_dir {
        cli::write_exports(&output, dir)?;
    }
    for row in output
        .report
        .traceability
        .iter()
        .filter(|r| r.status == cli::Status::Fail)
    {
        eprintln!("FAIL {:?}: {}", row.requirement, row.detail);
    }
    Ok(output.report.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mim: {e}");
            e.exit_code()
        }
    };
    debug_assert!(code <= EXIT_CONFIG);
    ExitCode::from(code as u8)
}
