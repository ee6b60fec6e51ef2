use std::process::ExitCode;

use clap::Parser;

mod commands;
mod report;

/// Exit codes: 0 prox_compatible / success, 1 not_prox (or a failed
/// pre-check), 2 inconclusive, 64 usage error, 65 domain/data error.
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
