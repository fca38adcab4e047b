//! `--config FILE` support: a JSON object whose keys are flag names of the
//! chosen command. Its entries are spliced into the argument list right after
//! the subcommand, skipping any flag the command line sets explicitly.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::CliError;

/// Removes `--config FILE` from `args` and returns the file, if any.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<PathBuf>, CliError> {
    let mut found = None;
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= args.len() {
                return Err(CliError::input("--config needs a file"));
            }
            found = Some(PathBuf::from(args.remove(i + 1)));
            args.remove(i);
            continue;
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            found = Some(PathBuf::from(path));
            args.remove(i);
            continue;
        }
        i += 1;
    }
    Ok(found)
}

fn scalar(key: &str, v: &Value) -> Result<Option<String>, CliError> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Bool(_) | Value::Null => Ok(None),
        _ => Err(CliError::input(format!("config key {key:?}: expected a scalar or a list of scalars"))),
    }
}

/// Command-line tokens for one config object.
fn config_tokens(obj: &serde_json::Map<String, Value>, explicit: &[String]) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || explicit.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                if items.is_empty() {
                    continue;
                }
                out.push(flag.into());
                for item in items {
                    if let Some(s) = scalar(key, item)? {
                        out.push(s.into());
                    }
                }
            }
            other => {
                out.push(flag.into());
                out.extend(scalar(key, other)?.map(OsString::from));
            }
        }
    }
    Ok(out)
}

/// Argument list with the config file's entries spliced in.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
    let Value::Object(obj) = value else {
        return Err(CliError::input(format!("config {} must hold a JSON object", path.display())));
    };
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let explicit: Vec<String> = args[sub + 1..].iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let tokens = config_tokens(&obj, &explicit)?;
    args.splice(sub + 1..sub + 1, tokens);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn splices_after_subcommand_and_respects_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"thr": 0.3, "metric": "l1", "w": [0, 0.1], "out": "a.json"}"#).unwrap();
        let args = os(&["ccpad", "estimate-lut", "--config", cfg.to_str().unwrap(), "--thr", "0.6"]);
        let got: Vec<String> = expand(args).unwrap().iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(
            got,
            ["ccpad", "estimate-lut", "--metric", "l1", "--out", "a.json", "--w", "0", "0.1", "--thr", "0.6"]
        );
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["ccpad", "bench", "--probes", "10"]);
        assert_eq!(expand(args.clone()).unwrap(), args);
    }

    #[test]
    fn nested_values_rejected() {
        let obj: serde_json::Map<String, Value> = serde_json::from_str(r#"{"x": {"y": 1}}"#).unwrap();
        assert!(config_tokens(&obj, &[]).is_err());
    }
}
