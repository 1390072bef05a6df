//! Command-line driver: parses arguments, runs one command, writes outputs
//! atomically under `--out`, and maps failures to exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | bad arguments |
//! | 3 | input or output file error |
//! | 10 | model gateway |
//! | 11 | DisCo evaluation |
//! | 12 | MBE evaluation |
//! | 13 | CDA generation |
//! | 14 | self-debiasing |
//! | 15 | report emission |
//! | 16 | serialization |
//! | 20 | conformance checks failed |
//!
//! On failure exactly one JSON line `{"error", "code", "message"}` goes to stderr.

pub mod args;
mod commands;
pub mod error;
pub mod provenance;

pub use args::{Cli, Command};
pub use error::CliError;

use clap::Parser;
use provenance::{Inputs, Outputs};
use std::ffi::OsString;

/// Runs one parsed command and returns the names of the files written.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let mut inputs = Inputs::default();
    let mut out = Outputs::new(&cli.out);
    let (name, endpoint) = match &cli.command {
        Command::EvalDisco(a) => {
            commands::eval_disco(a, &mut inputs, &mut out)?;
            ("eval-disco", Some(a.endpoint.endpoint.as_str()))
        }
        Command::EvalMbe(a) => {
            commands::eval_mbe(a, &mut inputs, &mut out)?;
            ("eval-mbe", Some(a.endpoint.endpoint.as_str()))
        }
        Command::GenCda(a) => {
            commands::gen_cda(a, &mut inputs, &mut out)?;
            ("gen-cda", None)
        }
        Command::PairNames(a) => {
            commands::pair_names(a, &mut inputs, &mut out)?;
            ("pair-names", None)
        }
        Command::ComposeManifest(a) => {
            commands::compose(a, &mut inputs, &mut out)?;
            ("compose-manifest", None)
        }
        Command::MergeTranslations(a) => {
            commands::merge_translations(a, &mut inputs, &mut out)?;
            ("merge-translations", None)
        }
        Command::Conformance(a) => {
            commands::conformance(a, &mut out)?;
            ("conformance", Some(a.endpoint.endpoint.as_str()))
        }
    };
    out.finish(name, endpoint, &inputs)
}

/// Parses `args` (program name first), runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(summarize_clap(&e.to_string()));
            eprintln!("{}", err.diagnostic());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

fn summarize_clap(rendered: &str) -> String {
    rendered
        .lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.strip_prefix("error: ").unwrap_or(l))
        .collect::<Vec<_>>()
        .join(" ")
}
