mod cli;
mod commands;
mod config;
mod error;

use clap::Parser;

use cli::{Cli, Command};
use error::CliError;

fn run(cli: &Cli) -> error::Result<()> {
    match &cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Spectral(a) => commands::spectral(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Segment(a) => commands::segment(a),
        Command::Crf(a) => commands::crf(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::InspectModel(a) => commands::inspect_model(a),
        Command::Pipeline(a) => commands::pipeline(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Usage(first).line());
            std::process::exit(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(&cli) {
        eprintln!("{}", e.line());
        std::process::exit(e.code());
    }
}
