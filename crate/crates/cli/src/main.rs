use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use qvlab_cli::{run, Cli, RunError, EXIT_OK, EXIT_USAGE};

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit(EXIT_OK),
                _ => exit(EXIT_USAGE),
            };
        }
    };
    let cfg = match cli.into_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            let e = RunError::from(e);
            eprintln!("qvlab: {e}");
            return exit(e.exit_code());
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for line in &outcome.summary {
                eprintln!("{line}");
            }
            exit(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("qvlab: {e}");
            exit(e.exit_code())
        }
    }
}
