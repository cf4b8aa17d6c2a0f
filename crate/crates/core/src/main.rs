use std::process::ExitCode;

use backsim::cli;

fn main() -> ExitCode {
    let spec = match cli::parse_args(std::env::args_os()) {
        Ok(spec) => spec,
        Err(e) => e.exit(),
    };
    match cli::run(&spec) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
