use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(benthos::cli::main_entry(std::env::args_os()))
}
