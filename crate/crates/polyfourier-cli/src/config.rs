//! Run configuration files.
//!
//! A config is TOML with a top-level `command` key, optional top-level
//! global options (`out`, `threads`, `seed`) and a table named after the
//! command whose keys are that command's long flags:
//!
//! ```toml
//! command = "expsum"
//! out = "runs/cubic"
//!
//! [expsum]
//! poly = "n^3 + n"
//! q = [11, 13]
//! all-a = true
//! ```

use std::fmt;

use toml::Value;

/// A malformed command line or config; reported with exit status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const GLOBAL_KEYS: &[&str] = &["out", "threads", "seed"];

fn scalar(key: &str, v: &Value) -> Result<String, UsageError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(x) => Ok(format!("{x:e}")),
        other => Err(UsageError(format!("key `{key}`: unsupported value {other}"))),
    }
}

fn push_flag(args: &mut Vec<String>, key: &str, v: &Value) -> Result<(), UsageError> {
    match v {
        Value::Boolean(true) => args.push(format!("--{key}")),
        Value::Boolean(false) => {}
        Value::Array(items) if items.is_empty() => {}
        Value::Array(items) => {
            let parts = items.iter().map(|x| scalar(key, x)).collect::<Result<Vec<_>, _>>()?;
            args.push(format!("--{key}"));
            args.push(parts.join(","));
        }
        other => {
            args.push(format!("--{key}"));
            args.push(scalar(key, other)?);
        }
    }
    Ok(())
}

/// Expands a config file into command-line arguments (without the program name).
pub fn config_to_args(text: &str) -> Result<Vec<String>, UsageError> {
    let table: toml::Table = text.parse().map_err(|e| UsageError(format!("config does not parse: {e}")))?;
    let command = match table.get("command") {
        Some(Value::String(c)) if !c.is_empty() => c.clone(),
        Some(_) => return Err(UsageError("config key `command` must be a non-empty string".into())),
        None => return Err(UsageError("config names no `command`".into())),
    };
    let mut args = Vec::new();
    for key in GLOBAL_KEYS {
        if let Some(v) = table.get(*key) {
            push_flag(&mut args, key, v)?;
        }
    }
    for key in table.keys() {
        if key != "command" && !GLOBAL_KEYS.contains(&key.as_str()) && key != &command {
            return Err(UsageError(format!("unknown config key `{key}`")));
        }
    }
    args.push(command.clone());
    match table.get(&command) {
        Some(Value::Table(section)) => {
            // Positional arguments (such as suite names) go under `args`.
            let mut positional = Vec::new();
            for (key, v) in section {
                if key == "args" {
                    match v {
                        Value::Array(items) => {
                            for x in items {
                                positional.push(scalar(key, x)?);
                            }
                        }
                        other => positional.push(scalar(key, other)?),
                    }
                } else {
                    push_flag(&mut args, key, v)?;
                }
            }
            args.extend(positional);
        }
        Some(_) => return Err(UsageError(format!("`{command}` must be a table"))),
        None => {}
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_a_usage_error() {
        assert!(config_to_args("").is_err());
    }

    #[test]
    fn sections_become_flags() {
        let text = "command = \"expsum\"\nthreads = 2\n[expsum]\npoly = \"n^3+n\"\nq = [11, 13]\nall-a = true\nall-m = false\n";
        let args = config_to_args(text).unwrap();
        assert_eq!(args, ["--threads", "2", "expsum", "--all-a", "--poly", "n^3+n", "--q", "11,13"]);
    }

    #[test]
    fn positional_arguments_follow_flags() {
        let args = config_to_args("command = \"verify\"\n[verify]\nargs = [\"gauss\", \"spectrum\"]\n").unwrap();
        assert_eq!(args, ["verify", "gauss", "spectrum"]);
    }

    #[test]
    fn stray_keys_are_rejected() {
        assert!(config_to_args("command = \"spectrum\"\nbogus = 1\n").is_err());
    }
}
