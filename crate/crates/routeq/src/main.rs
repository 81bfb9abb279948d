use std::process::ExitCode;

fn main() -> ExitCode {
    routeq::cli::run()
}
