use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use mesocov::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdin = io::stdin();
    let mut out = BufWriter::new(io::stdout().lock());
    let result = run(&cli, &mut stdin.lock(), &mut out);
    let _ = out.flush();
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result))
}
