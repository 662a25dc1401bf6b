use std::process::ExitCode;

fn main() -> ExitCode {
    sentiscope::cli::run(std::env::args_os())
}
