use std::process::ExitCode;

fn main() -> ExitCode {
    sigdmd::cli::main_entry()
}
