use std::process::ExitCode;

use clap::Parser;
use spp_cli::config::{Cli, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPP_LOG", "warn")).init();
    let result = RunConfig::from_cli(Cli::parse()).and_then(|config| spp_cli::run(&config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
