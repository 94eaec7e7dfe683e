use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = trackfill_cli::Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match trackfill_cli::run(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.code as u8)
        }
    }
}
