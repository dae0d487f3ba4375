use clap::Parser;

fn main() {
    if let Err(e) = n2rpp::cli::run(n2rpp::cli::Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
