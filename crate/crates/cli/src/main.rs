use clap::Parser;
use surfnoise_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("surfnoise: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
