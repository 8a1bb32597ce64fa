//! Command line entry point of the experiment driver.

fn main() {
    std::process::exit(tsl::cli::main_with_args(std::env::args_os()));
}
