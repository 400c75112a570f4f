//! `--config` files: `key = value` lines, `#` comments. Keys are long flag
//! names of the chosen subcommand, with `_` or `-`. Entries are appended
//! after the command-line flags, which they replace.

use std::ffi::OsString;
use std::path::Path;

use clap::{Command, CommandFactory, Parser};

use crate::args::Cli;
use crate::error::CliError;

/// Parses `argv`, folding in the config file when one is named.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    let Some(path) = config_path(&argv) else {
        return Cli::try_parse_from(argv).map_err(CliError::Clap);
    };
    let command = Cli::command();
    let Some(sub) = subcommand(&command, &argv) else {
        return Cli::try_parse_from(argv).map_err(CliError::Clap);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let (extra, keys) = config_args(sub, &text, &path)?;
    let kept = without_flags(argv, sub, &keys);
    Cli::try_parse_from(kept.into_iter().chain(extra)).map_err(CliError::Clap)
}

/// Drops command-line occurrences of `keys` so that list-valued flags are
/// replaced by the config rather than extended.
fn without_flags(argv: Vec<OsString>, sub: &Command, keys: &[String]) -> Vec<OsString> {
    let mut out = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter().peekable();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy().into_owned();
        let configured = |l: &&str| {
            keys.iter()
                .any(|k| l == k || l.starts_with(&format!("{k}=")))
        };
        let Some(long) = text.strip_prefix("--").filter(configured) else {
            out.push(arg);
            continue;
        };
        if long.contains('=') {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(long)) else {
            continue;
        };
        if arg.get_action().takes_values() {
            let multi = arg.get_num_args().is_some_and(|n| n.max_values() > 1);
            it.next();
            while multi
                && it
                    .peek()
                    .is_some_and(|v| !v.to_string_lossy().starts_with('-'))
            {
                it.next();
            }
        }
    }
    out
}

fn config_path(argv: &[OsString]) -> Option<std::path::PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let arg = arg.to_string_lossy();
        if arg == "--" {
            break;
        }
        if let Some(value) = arg.strip_prefix("--config=") {
            return Some(value.into());
        }
        if arg == "--config" {
            return it.next().map(Into::into);
        }
    }
    None
}

fn subcommand<'a>(command: &'a Command, argv: &[OsString]) -> Option<&'a Command> {
    argv.iter()
        .skip(1)
        .find_map(|a| command.find_subcommand(a.to_string_lossy().as_ref()))
}

fn config_args(
    sub: &Command,
    text: &str,
    path: &Path,
) -> Result<(Vec<OsString>, Vec<String>), CliError> {
    let mut out = Vec::new();
    let mut keys = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::Usage(format!("{}:{}: {msg}", path.display(), n + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key = value"))?;
        let long = key.trim().replace('_', "-");
        let value = value.trim();
        if long == "config" {
            return Err(bad("config files cannot include other config files"));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| bad(&format!("unknown key {long:?} for {}", sub.get_name())))?;
        keys.push(long.clone());
        if arg.get_action().takes_values() {
            out.push(format!("--{long}={value}").into());
        } else {
            match value {
                "true" => out.push(format!("--{long}").into()),
                "false" => {}
                _ => return Err(bad(&format!("{long} expects true or false"))),
            }
        }
    }
    Ok((out, keys))
}
