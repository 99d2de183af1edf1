use std::io::{self, Write};
use std::process::ExitCode;

use bnpart_cli::error::CliError;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = bnpart_cli::run(std::env::args_os(), &mut out);
    let _ = out.flush();
    let Err(e) = result else {
        return ExitCode::SUCCESS;
    };
    let code = e.exit_code() as u8;
    match e {
        CliError::Args(e) => {
            let _ = e.print();
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(code)
}
