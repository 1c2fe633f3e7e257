use std::process::ExitCode;

fn main() -> ExitCode {
    replicator_delay::cli::run()
}
