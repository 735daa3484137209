use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use oapsim_core::experiment::{
    emit, render_trace, run_scenario, summarize, trace_scenario, Execution, OutputFormat, Scenario,
};
use oapsim_core::protocols::ProtocolKind;

const BUNDLED: [(&str, &str); 3] = [
    (
        "fig1.scripted",
        include_str!("../../../scenarios/fig1.scripted"),
    ),
    (
        "fig2.scenario",
        include_str!("../../../scenarios/fig2.scenario"),
    ),
    (
        "grid100.scenario",
        include_str!("../../../scenarios/grid100.scenario"),
    ),
];

#[derive(Parser)]
#[command(
    name = "oapsim",
    version,
    about = "Coded over-the-air programming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of a scenario and write CSV, plots and a summary.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        root_seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "both", value_parser = parse_format)]
        format: OutputFormat,
        /// Comma-separated subset of the scenario's protocols.
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<ProtocolKind>>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the per-slot message trace of one run.
    Trace {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "coop")]
        protocol: ProtocolKind,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

/// Loads a scenario from disk, falling back to the bundled copies. The
/// returned directory anchors relative topology paths.
fn load(name: &str) -> Result<(Scenario, Option<PathBuf>)> {
    let path = Path::new(name);
    if path.exists() {
        let s = Scenario::load(path).with_context(|| format!("loading {name}"))?;
        return Ok((s, path.parent().map(Path::to_path_buf)));
    }
    match BUNDLED.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => Ok((
            Scenario::parse(text).with_context(|| format!("bundled {name}"))?,
            None,
        )),
        None => bail!(
            "no scenario file `{name}` (bundled: {})",
            BUNDLED.map(|(n, _)| n).join(", ")
        ),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            root_seed,
            out,
            format,
            protocols,
            jobs,
        } => {
            let (mut s, base) = load(&scenario)?;
            if let Some(seed) = root_seed {
                s.root_seed = seed;
            }
            if let Some(p) = protocols {
                s.protocols = p;
            }
            let exec = if jobs == Some(1) {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let rows = run_scenario(&s, base.as_deref(), exec, jobs)?;
            let mut summary = summarize(&rows);
            summary.seconds_per_slot = s.seconds_per_slot;
            let files = emit(&s.name, &rows, &summary, format, &out)?;
            print!("{summary}");
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Trace { scenario, protocol } => {
            let (s, base) = load(&scenario)?;
            let (topo, report) = trace_scenario(&s, base.as_deref(), protocol)?;
            print!(
                "{}",
                render_trace(&topo, report.trace.as_deref().unwrap_or_default())
            );
            match report.completion_slots {
                Some(c) => println!("# complete at slot {c}, {} nacks", report.nacks),
                None => println!("# timed out, {} nacks", report.nacks),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
