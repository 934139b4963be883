use clap::Parser;

fn main() {
    let cli = esdyn_cli::Cli::parse();
    std::process::exit(esdyn_cli::run(&cli));
}
