use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optocloud::runner::{
    configure_threads, execute, Command, LoadedScenario, ReportKind, RunContext, SweepAxis,
};

#[derive(Parser)]
#[command(
    name = "optocloud",
    version,
    about = "Optical cloud computing simulator"
)]
struct Cli {
    /// Scenario JSON file, or the name of a bundled scenario.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Output directory; defaults to the scenario's, then out/<name>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// 1D, 2D or elementary-op convolution, ideal against noisy.
    Convolve,
    /// Sweep baud (ENOB), extra attenuation (BER) or bits (accuracy).
    Sweep {
        #[arg(long)]
        axis: Option<SweepAxis>,
    },
    /// Power or throughput report.
    Report {
        #[arg(long)]
        kind: Option<ReportKind>,
    },
    /// Schedule and execute jobs on an OPU pool.
    RunCluster,
    /// Train the toy CNN and save it.
    TrainToy,
    /// Evaluate the toy CNN in float and with its first layer on OPUs.
    Eval,
    /// List bundled scenarios.
    Scenarios,
}

fn run(cli: Cli) -> optocloud::Result<()> {
    if let Some(n) = cli.parallel {
        configure_threads(n)?;
    }
    let command = match cli.command {
        Cmd::Scenarios => {
            for (name, _) in optocloud::runner::BUNDLED_SCENARIOS {
                println!("{name}");
            }
            return Ok(());
        }
        Cmd::Convolve => Command::Convolve,
        Cmd::Sweep { axis } => Command::Sweep(axis),
        Cmd::Report { kind } => Command::Report(kind),
        Cmd::RunCluster => Command::RunCluster,
        Cmd::TrainToy => Command::TrainToy,
        Cmd::Eval => Command::Eval,
    };
    let name = cli
        .scenario
        .ok_or_else(|| optocloud::Error::Configuration("--scenario is required".into()))?;
    let ctx = RunContext::new(LoadedScenario::load(&name)?, cli.out, cli.seed);
    let manifest = execute(command, &ctx)?;
    for line in &manifest.summary {
        println!("{line}");
    }
    println!(
        "wrote {} artifacts to {}",
        manifest.artifacts.len(),
        ctx.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
