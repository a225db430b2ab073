//! Front end of the `clusterperm` binary: CSV ingestion, configuration,
//! dispatch and report serialization.

pub mod args;
pub mod error;
pub mod ingest;
pub mod report;
pub mod run;

use std::io::Write;

pub use args::RunConfig;
pub use error::CliError;
pub use report::Report;
pub use run::run;

/// Serializes a report in the configured format.
pub fn render(report: &Report) -> String {
    match report.config.global.format {
        args::Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        args::Format::Text => report::render_text(report),
    }
}

/// Runs `config` and writes the rendered report; returns the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    if let Some(threads) = config.global.threads {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let outcome = run(config).and_then(|report| {
        let text = render(&report);
        match &config.global.out {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string())),
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}
