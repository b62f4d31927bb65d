mod args;
mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::settings::Settings;

fn run(cli: &Cli) -> anyhow::Result<()> {
    let settings = Settings::resolve(cli)?;
    match &cli.command {
        Command::Ingest(cmd) => commands::ingest(cmd),
        Command::Split(a) => commands::split(a, &settings),
        Command::Featurize(a) => commands::featurize_cmd(a, &settings),
        Command::Train(a) => commands::train(a, &settings),
        Command::Score(a) => commands::score(a, &settings),
        Command::Eval(a) => commands::eval(a),
        Command::Serve(a) => commands::serve(a, cli, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ASAG_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
