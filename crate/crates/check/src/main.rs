use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tf_check::cli::{run, Args};
use tf_check::CheckError;

fn main() -> ExitCode {
    let args = Args::parse();
    let report = match run(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("tf-check: {e}");
            return ExitCode::from(match e {
                CheckError::Usage(_) | CheckError::AlphabetMismatch { .. } => 2,
                _ => 3,
            });
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, &json) {
            eprintln!("tf-check: {}: {e}", path.display());
            return ExitCode::from(3);
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let written = if args.json {
        writeln!(out, "{json}")
    } else {
        report.render(&mut out)
    };
    if written.is_err() {
        return ExitCode::from(3);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
