use clap::Parser;

fn main() {
    let cli = optbench::cli::Cli::parse();
    std::process::exit(optbench::cli::run(cli));
}
