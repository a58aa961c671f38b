use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fluxgrad::cli::run(std::env::args_os()))
}
