//! The `triage` command-line tool.

use std::ffi::OsString;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level: tracing::level_filters::LevelFilter = match cli.log_level.parse() {
        Ok(level) => level,
        Err(_) => {
            eprintln!("error: usage error: invalid --log-level `{}`", cli.log_level);
            return 2;
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();

    let result = config::RunConfig::load(cli.preset.as_deref(), cli.config.as_deref()).and_then(|config| {
        let ctx = commands::Context { config, format: cli.format };
        commands::run(&ctx, cli.command)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
