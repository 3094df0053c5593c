use clap::Parser;
use hstdr_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(&cli) {
        eprintln!("{}", failure.report());
        std::process::exit(failure.exit_code());
    }
}
