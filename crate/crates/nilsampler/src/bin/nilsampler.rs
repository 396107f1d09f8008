use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nilsampler::cli::main_entry())
}
