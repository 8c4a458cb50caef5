use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctca_cli::commands::{cmd_compare, cmd_potential_check, cmd_price_sweep, cmd_simulate};
use ctca_cli::config::parse_algorithms;
use ctca_cli::{CliError, ExperimentSpec};

#[derive(Parser)]
#[command(name = "ctca", version, about = "Topology-control lifetime simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; drawn at random and echoed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated: ctca, dlss, drng, maxpower.
    #[arg(long, global = true)]
    algorithms: Option<String>,
    #[arg(long, global = true)]
    rounds: Option<u64>,
    #[arg(long, global = true)]
    replications: Option<u32>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Replications of one algorithm with per-run traces.
    Simulate,
    /// Matched-seed lifetime comparison of several algorithms.
    Compare,
    /// CTCA against the per-round optimum over a radius or density sweep.
    PriceSweep,
    /// Sign agreement of utility and potential over all unilateral deviations.
    PotentialCheck,
}

fn spec_from(cli: &Cli) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.sim.seed = seed;
        spec.seed_given = true;
    }
    if !spec.seed_given {
        spec.sim.seed = rand::random();
    }
    if let Some(list) = &cli.algorithms {
        spec.algorithms = parse_algorithms(list)?;
    }
    if let Some(r) = cli.rounds {
        spec.sim.rounds = r;
    }
    if let Some(r) = cli.replications {
        spec.sim.replications = r;
    }
    Ok(spec)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let spec = spec_from(cli)?;
    println!("seed={}", spec.sim.seed);
    match cli.command {
        Command::Simulate => {
            let r = cmd_simulate(&spec, &cli.out, cli.plot)?;
            let l: Vec<u64> = r.traces.iter().map(ctca_core::sim::lifetime_rounds).collect();
            let mean = l.iter().sum::<u64>() as f64 / l.len().max(1) as f64;
            println!("{}: {} replications, mean lifetime {mean} rounds", r.algorithm, l.len());
        }
        Command::Compare => {
            let r = cmd_compare(&spec, &cli.out, cli.plot)?;
            for (a, alg) in r.algorithms.iter().enumerate() {
                println!("{alg}: mean lifetime {} rounds", r.mean_lifetime(a));
            }
        }
        Command::PriceSweep => {
            let r = cmd_price_sweep(&spec, &cli.out, cli.plot)?;
            for s in &r.summaries {
                println!(
                    "{}={} round {}: mean ratio {}, {}% optimal over {}",
                    s.point.axis(),
                    s.point.value(),
                    s.round,
                    s.mean_ratio,
                    s.percent_optimal,
                    s.samples
                );
            }
            if r.violations > 0 {
                return Err(CliError::Violation(format!("{} ratios below 1", r.violations)));
            }
        }
        Command::PotentialCheck => {
            let r = cmd_potential_check(&spec, &cli.out)?;
            println!(
                "{} deviations over {} instances: {} consistent, {} both zero, {} violations ({} opposed)",
                r.deviations, r.instances, r.consistent, r.both_zero, r.violations, r.opposed
            );
            if r.violations > 0 {
                return Err(CliError::Violation(format!("{} sign violations", r.violations)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
