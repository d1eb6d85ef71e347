use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mulchtherm_cli::commands::{self, DepthsArgs, OptimizeArgs, RunArgs, ValidateArgs};
use mulchtherm_cli::CliError;

#[derive(Parser)]
#[command(name = "mulchtherm", version, about = "Soil temperature under plastic mulch films")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coupled film and soil model over a weather series.
    Simulate(RunArgs),
    /// Compare the simulated surface temperature with a measured trace.
    Validate(ValidateArgs),
    /// Simulate a factorial film design and pick the warmest levels.
    Optimize(OptimizeArgs),
    /// Damping depths of periodic surface forcing.
    Depths(DepthsArgs),
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Simulate(args) => commands::simulate(&args).map(|s| s.to_string()),
        Command::Validate(args) => commands::validate(&args).map(|r| r.to_string()),
        Command::Optimize(args) => {
            let summary = commands::optimize(&args)?;
            let unit = if args.sn { "dB" } else { "°C" };
            Ok(commands::optimal_text(&summary.optimum, unit).trim_end().to_string())
        }
        Command::Depths(args) => {
            let rows = commands::depths(&args)?;
            Ok(commands::depths_table(&rows, args.threshold).trim_end().to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mulchtherm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
