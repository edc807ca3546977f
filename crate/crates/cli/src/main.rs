mod args;
mod commands;
mod error;
mod format;
mod model;

use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match args::parse_with_config(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, run_args) = cli.command.split();
    match commands::run(kind, run_args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
