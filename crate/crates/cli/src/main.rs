use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use emshape_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = std::env::var_os("EMSHAPE_OUT").map(PathBuf::from);
    match run(&cli, out.as_deref()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if let Some(dir) = outcome.dir {
                println!("outputs in {}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("emshape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
