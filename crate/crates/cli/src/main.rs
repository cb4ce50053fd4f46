use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use gpchan_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("gpchan: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &outcome.output).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(outcome.output.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("gpchan: {e}");
        return ExitCode::from(2);
    }
    if let Some(note) = outcome.note {
        eprintln!("gpchan: {note}");
    }
    ExitCode::from(outcome.code as u8)
}
