use clap::Parser;

fn main() {
    let cli = ptw::cli::Cli::parse();
    std::process::exit(ptw::cli::run(cli));
}
