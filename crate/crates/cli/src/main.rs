mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use args::Command;
use error::CliError;

fn run() -> Result<String, CliError> {
    let cli = config::parse(std::env::args_os().collect())?;
    match &cli.command {
        Command::Stats(a) => commands::stats(a),
        Command::BpeTrain(a) => commands::bpe_train(a),
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Translate(a) => commands::translate(a),
        Command::ScoreBleu(a) => commands::score_bleu(a),
        Command::ScoreCcc(a) => commands::score_ccc(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Clap(clap_err) => {
                    let _ = clap_err.print();
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
