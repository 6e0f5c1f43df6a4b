use clap::Parser;

fn main() {
    let cli = qvi_cli::Cli::parse();
    std::process::exit(qvi_cli::run(&cli));
}
