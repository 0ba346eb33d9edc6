use std::process::ExitCode;

use clap::Parser;
use levcool_cli::{execute, Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let Command::Run(args) = Cli::parse().command;
    match execute(&args) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
