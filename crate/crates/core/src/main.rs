use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = ctrlc::set_handler(snvse::tools::cancel) {
        eprintln!("warning: cannot install interrupt handler: {e}");
    }
    snvse::cli::main_with_args(std::env::args_os())
}
