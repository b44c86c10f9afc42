use clap::Parser;

use bank::cli::{init_logging, run, Cli};

fn main() {
    let cli = Cli::parse();
    init_logging(cli.quiet);
    std::process::exit(run(cli));
}
