use clap::Parser;

fn main() {
    let cli = dikin_cli::Cli::parse();
    if let Err(e) = dikin_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
