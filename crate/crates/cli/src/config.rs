//! Flat `key = value` config files merged underneath command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::Failure;

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Format(format!("config line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Failure::Format(format!("config line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Turn config entries into flags for `sub`. Keys are argument names with
/// underscores (`max_rotation_deg` for `--max-rotation-deg`).
pub fn to_flags(sub: &Command, entries: &[(String, String)]) -> Result<Vec<OsString>, Failure> {
    let mut flags = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_id().as_str() == key && a.get_long().is_some() && key != "config")
            .ok_or_else(|| Failure::Invalid(format!("unknown config key `{key}` for `{}`", sub.get_name())))?;
        let long = format!("--{}", arg.get_long().unwrap_or_default());
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => flags.push(long.into()),
                "false" => {}
                other => {
                    return Err(Failure::Invalid(format!("config key `{key}`: expected true or false, got `{other}`")));
                }
            },
            _ => {
                flags.push(long.into());
                flags.push(value.into());
            }
        }
    }
    Ok(flags)
}

/// Insert the flags from the config file right after the subcommand name so
/// that explicit flags, which come later, take precedence.
pub fn merge(argv: &[OsString], root: &Command, sub_name: &str, path: &Path) -> Result<Vec<OsString>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let entries = parse(&text)?;
    let sub = root
        .find_subcommand(sub_name)
        .ok_or_else(|| Failure::Invalid(format!("unknown subcommand `{sub_name}`")))?;
    let flags = to_flags(sub, &entries)?;
    let pos = argv
        .iter()
        .position(|a| a == sub_name)
        .ok_or_else(|| Failure::Invalid(format!("subcommand `{sub_name}` not found in arguments")))?;
    let mut out = argv[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let e = parse("# plan\n\nn_rotations = 3 # fewer\nnoise_kind=gaussian\n").unwrap();
        assert_eq!(
            e,
            vec![
                ("n_rotations".to_string(), "3".to_string()),
                ("noise_kind".to_string(), "gaussian".to_string())
            ]
        );
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(matches!(parse("n_rotations 3"), Err(Failure::Format(_))));
    }
}
