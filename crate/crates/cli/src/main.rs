use clap::Parser;

fn main() {
    let cli = smurf_cli::Cli::parse();
    std::process::exit(smurf_cli::run(&cli));
}
