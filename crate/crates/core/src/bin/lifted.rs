use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lifted_connections::scenario::{preset_listing, run_scenario, Mode, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(name = "lifted", about = "Check lifted connections on tangent and cotangent bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the check suites listed in a scenario file.
    Verify(RunArgs),
    /// Estimate the holonomy algebra at the scenario's basepoint.
    Holonomy(RunArgs),
    /// Integrate a geodesic of the lifted connection.
    Geodesic {
        #[command(flatten)]
        run: RunArgs,
        /// Write the sampled trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in base connections.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply every tolerance by this factor.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    #[arg(long)]
    ode_step: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &RunArgs, mode: Mode, csv: Option<&PathBuf>) -> Result<bool, Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::from_file(&args.scenario)?;
    let opts = RunOptions {
        mode,
        seed: args.seed,
        tol_scale: args.tol_scale,
        ode_step: args.ode_step,
    };
    let report = run_scenario(&cfg, &opts)?;
    let json = report.to_json();
    // The summary goes to stdout unless stdout is carrying the JSON itself.
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json)?;
            report.summary_lines().iter().for_each(|l| println!("{l}"));
        }
        None => {
            print!("{json}");
            report.summary_lines().iter().for_each(|l| eprintln!("{l}"));
        }
    }
    if let (Some(path), Some(g)) = (csv, &report.geodesic) {
        std::fs::write(path, &g.csv)?;
    }
    Ok(report.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => run(a, Mode::Verify, None),
        Command::Holonomy(a) => run(a, Mode::Holonomy, None),
        Command::Geodesic { run: a, csv } => run(a, Mode::Geodesic, csv.as_ref()),
        Command::Presets => {
            preset_listing().iter().for_each(|l| println!("{l}"));
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
