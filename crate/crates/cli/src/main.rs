use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(wardrop_cli::dispatch(std::env::args()) as u8)
}
