use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(csdtest::cli::dispatch(std::env::args()) as u8)
}
