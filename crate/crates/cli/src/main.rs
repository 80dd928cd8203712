use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use ccdl_cli::args::Cli;
use ccdl_cli::{configured_threads, execute, load_spec, warnings, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(first_line(&e.to_string()))),
    };
    match try_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn try_main(cli: Cli) -> Result<(), CliError> {
    let threads = configured_threads()?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
    }
    let (command, flags) = cli.command.split();
    let spec = load_spec(command, &flags)?;
    for w in warnings(&spec) {
        eprintln!("{}", serde_json::json!({ "warning": w }));
    }
    execute(&spec)
}

fn first_line(text: &str) -> String {
    text.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json_line());
    ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
}
