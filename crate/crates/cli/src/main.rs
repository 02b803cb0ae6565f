use std::process::ExitCode;

use sparsecert_cli::{run, CliError};

fn main() -> ExitCode {
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    match run(std::env::args_os(), &mut out, &mut err) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("sparsecert: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
