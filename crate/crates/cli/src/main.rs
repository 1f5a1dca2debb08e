use clap::error::ErrorKind;
use clap::Parser;

use nnlab_cli::run;
use nnlab_cli::Cli;

/// Exit codes: 0 success, 1 validation (bad arguments or configuration),
/// 2 runtime failure, 3 check-suite violation.
fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => match error.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{error}");
                std::process::exit(0);
            }
            _ => {
                eprintln!("{error}");
                std::process::exit(1);
            }
        },
    };
    if let Err(failure) = run::execute(&cli.into_request()) {
        eprintln!("{}", failure.error_object());
        std::process::exit(failure.exit_code());
    }
}
