//! Merging a JSON configuration file under the command-line flags.
//!
//! Config entries become flag tokens placed right after the subcommand, so
//! any flag repeated on the command line overrides them.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, Context, Result};

/// Single-letter flags keep their case; everything else is kebab-case.
fn flag_name(key: &str) -> String {
    if key.len() == 1 {
        key.to_string()
    } else {
        key.replace('_', "-")
    }
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(CliError::usage(format!("config entry '{key}' must hold a string, number or list of those"))),
    }
}

/// Flag tokens for one config entry.
fn tokens(key: &str, value: &Value) -> Result<Vec<String>> {
    let flag = format!("--{}", flag_name(key));
    if flag == "--config" {
        return Err(CliError::usage("config files cannot include other config files"));
    }
    Ok(match value {
        Value::Null | Value::Bool(false) => Vec::new(),
        Value::Bool(true) => vec![flag],
        Value::Array(items) => {
            let parts = items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>>>()?;
            vec![flag, parts.join(",")]
        }
        other => vec![flag, scalar(key, other)?],
    })
}

/// Config file named by `--config` among `args`, if any.
fn config_path(args: &[OsString]) -> Result<Option<OsString>> {
    let mut found = None;
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = iter.next().ok_or_else(|| CliError::usage("--config needs a file"))?;
            found = Some(path.clone());
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(OsString::from(rest));
        }
    }
    Ok(found)
}

/// Returns `argv` with the config file's entries inserted after the
/// subcommand. `argv[0]` is the program name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let Some(path) = config_path(&argv[2..])? else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let entries = phmm::io::parse_config_json(&text).context(|| format!("reading config {}", path.display()))?;
    let mut injected = Vec::new();
    for (key, value) in &entries {
        injected.extend(tokens(key, value)?.into_iter().map(OsString::from));
    }
    let mut out = argv[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}
