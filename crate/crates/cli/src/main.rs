use clap::Parser;
use clusterperm_cli::{execute, RunConfig};

fn main() {
    let config = RunConfig::parse();
    std::process::exit(execute(&config));
}
