use std::io::Write;
use std::process::ExitCode;

use bgeo_cli::error::CliError;
use bgeo_cli::output::OutputFormat;
use bgeo_cli::Cli;
use clap::Parser;

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BGEO_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("BGEO_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| bgeo_cli::commands::run(&cli));
    match result {
        Ok((report, format)) => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let written = match format {
                OutputFormat::Json => serde_json::to_writer_pretty(&mut out, &report.json)
                    .map_err(std::io::Error::other)
                    .and_then(|_| writeln!(out)),
                OutputFormat::Csv => match (&report.csv_text, &report.table) {
                    (Some(text), _) => out.write_all(text.as_bytes()),
                    (None, Some(t)) => t.write_csv(&mut out),
                    (None, None) => writeln!(out),
                },
            };
            if let Err(e) = written.and_then(|_| out.flush()) {
                eprintln!("bgeo: {e}");
                return ExitCode::from(1);
            }
            if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("bgeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
