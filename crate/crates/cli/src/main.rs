use clap::Parser;
use tucker_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("tucker: {e}");
        std::process::exit(e.exit_code());
    }
}
