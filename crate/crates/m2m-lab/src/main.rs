use clap::Parser;
use m2m_lab::cli::{self, Cli};

fn main() {
    let cli = Cli::parse();
    match cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            std::process::exit(1);
        }
    }
}
