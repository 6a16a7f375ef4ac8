use std::io::{self, BufWriter};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let code = expstat_cli::main_with(std::env::args_os(), &mut out, &mut io::stderr());
    ExitCode::from(code)
}
