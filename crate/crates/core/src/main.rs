use clap::Parser;

fn main() {
    let cli = agebif::cli::Cli::parse();
    std::process::exit(agebif::cli::run(cli));
}
