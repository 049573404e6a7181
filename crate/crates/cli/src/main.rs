use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nls_masscurve_cli::run_from(std::env::args_os()))
}
