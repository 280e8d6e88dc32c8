use std::process::ExitCode;

use clap::Parser;
use inopo_cli::Args;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = args
        .resolve()
        .and_then(|cfg| inopo_cli::run(&cfg, args.figure));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
