use std::process::ExitCode;

fn main() -> ExitCode {
    retroscore::cli::run(std::env::args_os())
}
