//! Command-line interface: trial simulation, certification scans, gain
//! rates, Bell-like bound computation, and hypothesis-set inspection.

mod commands;
mod config;
mod output;
mod select;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bellcert",
    version,
    about = "Device-independent certification of quantum properties from Bell-test data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample i.i.d. trials from a quantum strategy and write them as
    /// JSON-Lines (optionally CSV).
    Simulate(commands::SimulateArgs),
    /// Run a threshold scan over trial data and report the certified value.
    Certify(commands::CertifyArgs),
    /// Asymptotic confidence-gain rates for both protocols.
    Gain(commands::GainArgs),
    /// Maximum of a Bell functional over a hypothesis set.
    Bound(commands::BoundArgs),
    /// Describe the conic structure of a hypothesis set.
    Explain(commands::ExplainArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Certify(a) => commands::certify(a),
        Command::Gain(a) => commands::gain(a),
        Command::Bound(a) => commands::bound(a),
        Command::Explain(a) => commands::explain(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
