use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use extremal::cli::{self, Cli};

fn run(cli: &Cli) -> anyhow::Result<cli::Outcome> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let outcome = cli::run(cli, &mut out).context("extremal")?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(o) => ExitCode::from(o.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<extremal::Error>().map_or(1, cli::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
