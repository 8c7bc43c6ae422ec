use clap::Parser;

fn main() {
    let cli = ldlf::cli::Cli::parse();
    if let Err(e) = ldlf::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
