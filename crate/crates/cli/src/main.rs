use clap::Parser;

fn main() {
    let cli = match descent_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { descent_cli::EXIT_USAGE } else { descent_cli::EXIT_OK };
            if e.use_stderr() {
                eprint!("ERROR: {e}");
            } else {
                print!("{e}");
            }
            std::process::exit(code);
        }
    };
    std::process::exit(descent_cli::execute(&cli));
}
