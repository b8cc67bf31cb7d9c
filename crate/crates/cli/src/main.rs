use std::process::ExitCode;

fn main() -> ExitCode {
    samia::cli::run(std::env::args_os())
}
