use std::process::ExitCode;

fn main() -> ExitCode {
    lvbounds::cli::main_with_args(std::env::args_os())
}
