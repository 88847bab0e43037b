mod analysis;
mod args;
mod commands;
mod error;
mod input;
mod manifest;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::Ctx;
use crate::error::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx {
        argv: std::env::args().skip(1).collect(),
        canonical: cli.canonical,
    };
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a, &ctx),
        Command::Poc(a) => commands::poc(a, &ctx),
        Command::Sweep(a) => commands::sweep(a, &ctx),
        Command::Stress(a) => commands::stress(a, &ctx),
        Command::Stats(c) => analysis::stats(c, &ctx),
        Command::Topo(c) => analysis::topo(c, &ctx),
    };
    result.unwrap_or_else(|f: Failure| {
        eprintln!("error: {f}");
        f.exit_code()
    })
}
