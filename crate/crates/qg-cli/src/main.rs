//! `qg` — scenario runner and verification report CLI.
//!
//! Verbs: `run` (full scenario with its configured diagnostics), `audit`,
//! `degiorgi`, `bootstrap`, `norms` (same run restricted to one diagnostic
//! family), and `report` (consolidated table from an existing manifest).
//!
//! Exit codes: 0 all verdicts pass, 1 any FAIL, 2 execution error.

use clap::{Parser, Subcommand};
use qg_cli::scenario::{self, Diagnostic};
use qg_cli::{manifest, orchestrate};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qg", version, about = "quasi-geostrophic scenario runner")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (strict key=value format)
    scenario: PathBuf,
    /// Override the output root (also settable via QG_OUTPUT_DIR)
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Continue from the state snapshot left by a previous (possibly
    /// aborted) run of the same scenario instead of restarting
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Run a scenario with its configured diagnostics
    Run(RunArgs),
    /// Run with only the a priori energy/conservation audits
    Audit(RunArgs),
    /// Run with only the level-set truncation/cascade diagnostics
    Degiorgi(RunArgs),
    /// Run with only the Duhamel bootstrap diagnostics
    Bootstrap(RunArgs),
    /// Run with only the norm reports
    Norms(RunArgs),
    /// Verify a manifest and emit a consolidated verdict report
    Report {
        /// Path to a manifest.txt produced by a run
        manifest: PathBuf,
        /// Output format
        #[arg(long, default_value = "text")]
        format: String,
        /// Write the report to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(args: &RunArgs, restrict: Option<Diagnostic>) -> Result<bool, String> {
    let mut s = scenario::load_scenario(&args.scenario)?;
    if let Some(d) = restrict {
        s.diagnostics = [d].into();
    }
    if let Some(dir) = &args.output_dir {
        s.output_dir = dir.clone();
    }
    let (manifest, dir) = orchestrate::run_scenario(&s, args.resume)?;
    if let Some(reason) = manifest.status.strip_prefix("aborted") {
        return Err(format!(
            "run aborted{reason}; last valid state in {}",
            dir.display()
        ));
    }
    println!(
        "{}: {} verdicts, {}",
        dir.join(manifest::MANIFEST_FILE).display(),
        manifest.verdicts.len(),
        if manifest.all_pass() { "all PASS" } else { "FAIL present" }
    );
    Ok(manifest.all_pass())
}

fn dispatch(cli: Cli) -> Result<bool, String> {
    match &cli.verb {
        Verb::Run(a) => execute(a, None),
        Verb::Audit(a) => execute(a, Some(Diagnostic::Apriori)),
        Verb::Degiorgi(a) => execute(a, Some(Diagnostic::Degiorgi)),
        Verb::Bootstrap(a) => execute(a, Some(Diagnostic::Bootstrap)),
        Verb::Norms(a) => execute(a, Some(Diagnostic::Norms)),
        Verb::Report {
            manifest,
            format,
            out,
        } => {
            let (text, all_pass) = orchestrate::emit_report(manifest, format)?;
            match out {
                Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string())?,
                None => print!("{text}"),
            }
            Ok(all_pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
