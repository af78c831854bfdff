use std::io;
use std::process::ExitCode;

use clap::Parser;
use kanload::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<kanload::Error>().map_or(1, exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn run_cli(cli: Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    run(cli, &mut lock)?;
    Ok(())
}
