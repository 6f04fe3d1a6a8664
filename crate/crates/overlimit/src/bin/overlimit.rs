use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(overlimit::cli::run() as u8)
}
