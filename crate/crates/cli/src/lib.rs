//! The `wlrbg` command line: synthetic scenes, background decomposition,
//! the closed-form baseline, metric reports and raw solver runs.

pub mod args;
mod commands;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser};

use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_FAILURE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(Status::Done) => EXIT_OK,
        Ok(Status::NotConverged) => {
            eprintln!("warning: the solver stopped at its iteration limit without converging");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Appends settings from `--config FILE` for every flag of the chosen
/// subcommand that the command line does not already set.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut config: Option<PathBuf> = None;
    let mut sub: Option<String> = None;
    let mut i = 1;
    while i < strs.len() {
        let a = &strs[i];
        if a == "--config" {
            config = strs.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(a.clone());
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (config, sub) else {
        return Ok(argv);
    };
    let settings = wlr_core::config::load(&path).map_err(|e| e.to_string())?;
    let cmd = Cli::command();
    let Some(sc) = cmd.find_subcommand(&sub) else {
        return Ok(argv);
    };
    for (key, value) in settings {
        if key == "config" {
            continue;
        }
        let arg = sc
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("{}: unknown setting `{key}` for `{sub}`", path.display()))?;
        let flag = format!("--{key}");
        let given = strs
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            argv.push(flag.into());
            argv.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => argv.push(flag.into()),
                "false" | "no" | "0" | "off" => {}
                other => {
                    return Err(format!(
                        "{}: `{key}` expects true or false, got `{other}`",
                        path.display()
                    ))
                }
            }
        }
    }
    Ok(argv)
}
