//! `key = value` config files. Keys are long flag names of the chosen
//! subcommand (or global flags). Values are spliced in right after the
//! subcommand name; keys also given on the command line are skipped.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Command;

#[derive(Debug)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), i + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(format!("{}:{}: empty key", path.display(), i + 1));
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().trim_matches('"').to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Returns `argv` with the config file's entries inserted after the
/// subcommand name. Errors here are usage errors.
pub fn merge(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let entries = parse(&text, &path)?;
    let Some(pos) = argv
        .iter()
        .position(|a| cmd.get_subcommands().any(|s| a.to_str() == Some(s.get_name())))
    else {
        return Ok(argv);
    };
    let sub = cmd
        .find_subcommand(argv[pos].to_str().unwrap_or_default())
        .expect("position found by name");
    let mut injected = Vec::new();
    for e in entries {
        if e.key == "config" {
            return Err(format!("{}:{}: a config file cannot name another", path.display(), e.line));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments().filter(|a| a.is_global_set()))
            .find(|a| a.get_long() == Some(e.key.as_str()))
            .ok_or_else(|| {
                format!(
                    "{}:{}: unknown key `{}` for `{}`",
                    path.display(),
                    e.line,
                    e.key,
                    sub.get_name()
                )
            })?;
        let flag = format!("--{}", e.key);
        let given = argv.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        });
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(OsString::from(flag));
            injected.push(OsString::from(e.value));
        } else {
            match e.value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(flag)),
                "false" | "0" | "no" => {}
                other => {
                    return Err(format!(
                        "{}:{}: `{}` is a switch; expected true or false, got `{other}`",
                        path.display(),
                        e.line,
                        e.key
                    ))
                }
            }
        }
    }
    let mut out = argv;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}
