mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::expand(&raw) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&anyhow::anyhow!(e));
        }
    }
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

/// One machine-parseable line: `steinerwl-error: <kind>: <message>`.
fn fail(e: &anyhow::Error) -> ExitCode {
    let kind = e.chain().find_map(|c| c.downcast_ref::<steinerwl::Error>()).map_or("error", steinerwl::Error::kind);
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let m = cause.to_string();
        if !parts.iter().any(|p| p.contains(&m)) {
            parts.push(m);
        }
    }
    let msg = parts.join(": ").replace('\n', " ");
    eprintln!("steinerwl-error: {kind}: {msg}");
    ExitCode::from(1)
}
