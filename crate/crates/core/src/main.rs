use clap::Parser;
use riplab::cli::{run, RunConfig};

fn main() {
    let cfg = RunConfig::parse();
    std::process::exit(run(&cfg));
}
