use std::process::ExitCode;

use clap::Parser;
use repgen::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match repgen::execute(&cli) {
        Ok(manifest) => {
            for file in &manifest.outputs {
                println!("{}", manifest.config.output_dir.join(&file.path).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
