mod args;
mod commands;
mod error;
mod svg;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Make(a) => commands::make(a),
        Command::Validate { input } => commands::validate(input),
        Command::Filter(a) => commands::filter(a),
        Command::Distill(a) => commands::distill(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Fig3(a) => commands::fig3(a),
    };
    if let Err(e) = result {
        eprintln!("{}", e.diagnostic());
        std::process::exit(e.exit_code());
    }
}
