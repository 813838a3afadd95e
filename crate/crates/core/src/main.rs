use std::process::ExitCode;

fn main() -> ExitCode {
    let code = vlsim::harness::cli::run_cli(std::env::args_os());
    ExitCode::from(code.clamp(0, 255) as u8)
}
