use std::process::ExitCode;

fn main() -> ExitCode {
    mtbench::cli::main_with_args(std::env::args_os())
}
