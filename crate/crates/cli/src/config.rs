//! `key=value` configuration files, turned into flags placed right after the
//! subcommand so that flags typed on the command line override them.

use std::fs;
use std::path::Path;

use crate::error::CliError;

const COMMANDS: [&str; 5] = ["eigs", "norm", "project", "simulate", "suffcond"];

/// Flags from a configuration text. `key=true` becomes a bare switch,
/// `key=false` is dropped, and `command=<name>` is returned separately.
pub fn parse_config(text: &str) -> Result<(Option<String>, Vec<String>), CliError> {
    let mut command = None;
    let mut flags = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", n + 1)));
        }
        if key == "config" {
            return Err(CliError::Config("config files cannot include other config files".into()));
        }
        if key == "command" {
            command = Some(value.to_string());
            continue;
        }
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => flags.push(format!("--{key}={v}")),
        }
    }
    Ok((command, flags))
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
        if a == "--" {
            break;
        }
    }
    None
}

/// Splices the configuration file named by `--config` into `args`.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| CliError::Input { path: path.clone(), source })?;
    let (command, flags) = parse_config(&text)?;
    let position = args.iter().position(|a| COMMANDS.contains(&a.as_str()));
    let mut out = args;
    match position {
        Some(i) => {
            if let Some(c) = &command {
                if *c != out[i] {
                    return Err(CliError::Config(format!(
                        "config file is for `{c}` but `{}` was requested",
                        out[i]
                    )));
                }
            }
            out.splice(i + 1..i + 1, flags);
        }
        None => {
            let c = command.ok_or_else(|| CliError::Config("no subcommand on the command line or in the config file".into()))?;
            let rest = out.split_off(1);
            out.push(c);
            out.extend(flags);
            out.extend(rest);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_lines() {
        let (cmd, flags) = parse_config("# sweep\ncommand = eigs\nbc=neumann\nskip_invalid=true\nx=false\n\nm = 1..5\n").unwrap();
        assert_eq!(cmd.as_deref(), Some("eigs"));
        assert_eq!(flags, strings(&["--bc=neumann", "--skip-invalid", "--m=1..5"]));
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(matches!(parse_config("bc neumann"), Err(CliError::Config(_))));
        assert!(matches!(parse_config("=3"), Err(CliError::Config(_))));
    }

    #[test]
    fn file_flags_precede_command_line_flags() {
        let dir = std::env::temp_dir().join(format!("oblique-stab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "m=3\nr=0.2\n").unwrap();
        let p = path.to_string_lossy().to_string();
        let out = expand_args(strings(&["prog", "--config", &p, "eigs", "--r", "0.3"])).unwrap();
        assert_eq!(out, strings(&["prog", "--config", &p, "eigs", "--m=3", "--r=0.2", "--r", "0.3"]));

        std::fs::write(&path, "command=norm\nm=3\n").unwrap();
        let out = expand_args(strings(&["prog", "--config", &p])).unwrap();
        assert_eq!(out, strings(&["prog", "norm", "--m=3", "--config", &p]));
        assert!(expand_args(strings(&["prog", "--config", &p, "eigs"])).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
