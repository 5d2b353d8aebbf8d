use clap::Parser;
use levyfluct::cli_io::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
