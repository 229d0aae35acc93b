use clap::Parser;

fn main() {
    let cli = selfbias::cli::Cli::parse();
    if let Err(e) = selfbias::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
