//! `key = value` config files.
//!
//! Keys are long flag names of the chosen subcommand (`eps-list` or
//! `eps_list`). Entries become flags inserted right after the subcommand,
//! skipping any flag already on the command line, so explicit flags win.
//! `true` turns on a switch and `false` leaves it off. `runs` takes a
//! whitespace-separated list.

use std::collections::HashSet;
use std::fs;

use crate::error::{CliError, CliResult};

pub fn parse(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", n + 1)));
        }
        if !seen.insert(key.clone()) {
            return Err(CliError::usage(format!("config line {}: duplicate key {key:?}", n + 1)));
        }
        entries.push((key, value.trim().to_owned()));
    }
    Ok(entries)
}

/// Pull `--config <path>` out of `argv` and splice the file's entries in.
pub fn apply(mut argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                return Err(CliError::usage("--config needs a file path"));
            }
            path = Some(argv.remove(i + 1));
            argv.remove(i);
        } else if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(p.to_owned());
            argv.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| CliError::usage(format!("cannot read config file {path}: {e}")))?;
    let entries = parse(&text)?;

    let Some(sub) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let explicit: HashSet<String> = argv[sub + 1..]
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).replace('_', "-"))
        .collect();
    let mut injected = Vec::new();
    for (key, value) in entries {
        if explicit.contains(&key) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ if key == "runs" => {
                injected.push("--runs".into());
                injected.extend(value.split_whitespace().map(str::to_owned));
            }
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
        }
    }
    argv.splice(sub + 1..sub + 1, injected);
    Ok(argv)
}
