use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use hdmt::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out).and_then(|()| out.flush().map_err(Into::into)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hdmt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
