use clap::Parser;

fn main() {
    let cli = quantlet_cli::Cli::parse();
    if let Err(e) = quantlet_cli::execute(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
