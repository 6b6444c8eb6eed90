//! Command-line front end: argument handling, scenario sweeps and report
//! files.

mod args;
pub mod report;
mod run;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{parse_list, parse_top_n, TopN};
pub use run::{Exit, RunConfig};

/// Runs the command line and returns the process exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => Exit::Usage as i32,
            };
        }
    };
    let cfg = match RunConfig::from_args(&cli.command) {
        Ok(c) => c,
        Err(e) => return report_error(e),
    };
    let out = match run::execute(&cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => return report_error(e),
    };
    let dir = &cli.command.common().out;
    if let Err(e) = out.write(dir, &cfg.header) {
        eprintln!("error: cannot write reports to {}: {e}", dir.display());
        return Exit::Infeasible as i32;
    }
    print!("{}", out.summary);
    out.exit as i32
}

fn report_error(e: run::RunError) -> i32 {
    match e {
        run::RunError::Usage(m) => {
            eprintln!("error: {m}\n\nRun 'ddcp --help' for usage.");
            Exit::Usage as i32
        }
        run::RunError::Failed(m) => {
            eprintln!("error: {m}");
            Exit::Infeasible as i32
        }
    }
}
