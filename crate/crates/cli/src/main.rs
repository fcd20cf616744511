use std::process::ExitCode;

use canonlab_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(manifest) => {
            println!("{}", manifest.outputs.join("\n"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("canonlab {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
