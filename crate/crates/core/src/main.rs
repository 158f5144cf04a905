use clap::Parser;

fn main() {
    std::process::exit(billiards::cli::execute(billiards::cli::Cli::parse()));
}
