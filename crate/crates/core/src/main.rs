use clap::Parser;
use warpcurv::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
