//! `followup` binary: train, evaluate, and probe the follow-up query
//! analysis pipeline. Exit codes: 0 success, 1 operational failure, 2 usage
//! or input-validation error.

mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command};
use commands::print_cli_error;

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Fuse(a) => commands::fuse_cmd(a),
        Command::Candidates(a) => commands::candidates_cmd(a),
        Command::Inspect(a) => commands::inspect_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
    };
    if let Err(err) = result {
        std::process::exit(print_cli_error(&err));
    }
}
