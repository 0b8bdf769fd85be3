mod args;
mod manifest;
mod run;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => run::cmd_fit(a),
        Command::Experiment(a) => run::cmd_experiment(a),
        Command::Generate(a) => run::cmd_generate(a),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
