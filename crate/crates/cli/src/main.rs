use clap::Parser;

fn main() {
    std::process::exit(simco_cli::run(simco_cli::Cli::parse()));
}
