use std::process::ExitCode;

use clap::Parser;

use bitstream_lab::experiment::{run, ExperimentConfig};

const THREADS_VAR: &str = "BITSTREAM_LAB_THREADS";

fn main() -> ExitCode {
    let config = ExperimentConfig::parse();

    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(k) if k > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                {
                    eprintln!("error: cannot size thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }

    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = report.render(config.format);
    match &config.output_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    for c in report.failures() {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    ExitCode::from(report.exit_code() as u8)
}
