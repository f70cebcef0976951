use clap::Parser;
use critlab_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        if e.code != 0 {
            eprintln!("critlab: {e}");
        }
        std::process::exit(e.code);
    }
}
