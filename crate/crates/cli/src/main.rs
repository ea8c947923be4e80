//! `onephase`: batch experiment runner. Prints the result envelope as JSON and
//! writes it, with the CSV artifacts, to the output directory.
//!
//! Exit codes: 0 on success, 1 on an operation error, 2 on a malformed command
//! line or config.

mod args;
mod commands;
mod fields;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, ExperimentConfig, DEFAULT_OUT};
use output::{envelope, error_document, pretty, read_text, write_all, CliError, CliResult};

fn resolve(cli: Cli) -> CliResult<ExperimentConfig> {
    match (cli.config, cli.command) {
        (Some(path), None) => {
            let text = read_text(&path).map_err(|e| CliError::Config(e.to_string()))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(out) = cli.out {
                cfg.out = out;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            Ok(cfg)
        }
        (None, Some(command)) => {
            Ok(ExperimentConfig { out: cli.out.unwrap_or_else(|| DEFAULT_OUT.into()), seed: cli.seed.unwrap_or(0), command })
        }
        (Some(_), Some(_)) => Err(CliError::Config("use either --config or a subcommand, not both".into())),
        (None, None) => Err(CliError::Config("missing subcommand (or --config)".into())),
    }
}

fn fail(err: &CliError, config: Option<&ExperimentConfig>) -> ExitCode {
    print!("{}", pretty(&error_document(err, config)));
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    let outcome = match commands::run(&config) {
        Ok(o) => o,
        Err(e) => return fail(&e, Some(&config)),
    };
    let doc = envelope(&config, outcome.result);
    if let Err(e) = write_all(&config.out, &doc, &outcome.artifacts) {
        return fail(&e, Some(&config));
    }
    print!("{}", pretty(&doc));
    ExitCode::SUCCESS
}
