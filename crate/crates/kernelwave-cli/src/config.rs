//! `key = value` configuration files. Keys are long flag names; flags given on
//! the command line win over the file.

use std::ffi::OsString;

use clap::Command;

/// Parses the file body into `(key, value)` pairs, ignoring blank lines and `#` comments.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("config line {}: expected key = value", n + 1));
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", n + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` anywhere in the arguments.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Inserts config entries as flags right after the subcommand name, so that
/// later command-line occurrences override them. Keys the subcommand does not
/// define are skipped, which lets one file serve several subcommands.
pub fn merge(cmd: &Command, args: Vec<OsString>, entries: &[(String, String)]) -> Result<Vec<OsString>, String> {
    let Some(pos) = args.iter().position(|a| cmd.find_subcommand(a).is_some()) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("subcommand located above");
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                other => return Err(format!("config key '{key}' is a switch, got '{other}'")),
            }
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse("# quad\nrel_tol = 1e-8\n\n--backend=saddle # inline\n").unwrap();
        assert_eq!(e, vec![("rel-tol".into(), "1e-8".into()), ("backend".into(), "saddle".into())]);
        assert!(parse("just words").is_err());
    }

    #[test]
    fn finds_config_path() {
        let a: Vec<OsString> = ["kw", "eval", "--config=x.cfg"].iter().map(Into::into).collect();
        assert_eq!(config_path(&a), Some("x.cfg".into()));
        let a: Vec<OsString> = ["kw", "--config", "y.cfg", "eval"].iter().map(Into::into).collect();
        assert_eq!(config_path(&a), Some("y.cfg".into()));
    }
}
