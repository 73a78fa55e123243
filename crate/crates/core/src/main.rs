use std::process::ExitCode;

use blockhess::cli::{execute, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((summary, failed)) => {
            for note in &summary.notes {
                eprintln!("note: {note}");
            }
            eprintln!(
                "wrote {} files to {}",
                summary.files.len(),
                cli.command.args().out.display()
            );
            if failed {
                eprintln!("strict mode: {} run(s) diverged or failed", summary.failures);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
