use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hopflow::experiment::{run_scenario, run_sweep, RunOverrides, SolverMode, SweepSpec};
use hopflow::report::{write_run_artifacts, write_sweep_artifacts};
use hopflow::ScenarioConfig;

/// Multi-hop spectrum/power allocation runner.
#[derive(Parser)]
#[command(name = "hopflow", version, about)]
struct Cli {
    /// Scenario config path (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solver route: reference, layered, device or direct.
    #[arg(long, default_value = "reference")]
    mode: String,
    /// Sweep spec path (JSON). When given, runs the sweep instead of a
    /// single solve.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Topology seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Replications override for sweeps.
    #[arg(long)]
    replications: Option<usize>,
    /// Iteration budget override.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Penalty weight override for the splitting routes.
    #[arg(long)]
    rho: Option<f64>,
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(sweep_path) = &cli.sweep {
        let mut spec = SweepSpec::from_file(sweep_path)?;
        if let Some(reps) = cli.replications {
            spec.replications = reps;
        }
        if let Some(seed) = cli.seed {
            spec.seed_base = Some(seed);
        }
        let result = run_sweep(&spec);
        write_sweep_artifacts(&cli.out, &result)?;
        for cell in &result.cells {
            println!(
                "{}={} mode={} n={} fail={} objective={:.3} kbps power={:.4} W",
                cell.variable,
                cell.value,
                cell.mode,
                cell.replications,
                cell.failures,
                cell.mean_objective_kbps,
                cell.mean_power_watts
            );
        }
        println!("sweep artifacts in {}", cli.out.display());
        return Ok(());
    }

    let config = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    let mode: SolverMode = cli.mode.parse()?;
    let overrides = RunOverrides { seed: cli.seed, max_iters: cli.max_iters, rho: cli.rho };
    let output = run_scenario(&config, mode, &overrides)?;
    write_run_artifacts(&cli.out, &output)?;
    let record = &output.record;
    println!(
        "mode={} seed={} users={} links={} objective={:.3} kbps power={:.2} dBm \
         iterations={} converged={} violation={:.2e}",
        record.mode,
        record.seed,
        record.num_users,
        record.num_links,
        record.objective_kbps,
        record.total_power_dbm,
        record.iterations,
        record.converged,
        record.worst_violation
    );
    println!("artifacts in {}", cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
