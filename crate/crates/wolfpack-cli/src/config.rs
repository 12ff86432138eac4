//! Config resolution: TOML file, then dotted-key overrides, then
//! deserialization into the run config. The fully resolved config is
//! echoed into the run directory so any run can be reproduced from its
//! artifacts alone.

use crate::CliError;
use std::path::Path;
use wolfpack_core::RunConfig;

/// Load the config file (or defaults), apply `--seed` and `--set`
/// overrides, and deserialize.
pub fn resolve_config(
    path: Option<&Path>,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut root: toml::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Value::Table(toml::map::Map::new()),
    };
    if let Some(seed) = seed {
        apply_override(&mut root, "gwo.seed", &seed.to_string())?;
    }
    for entry in overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {entry:?} is not KEY=VALUE")))?;
        apply_override(&mut root, key.trim(), value.trim())?;
    }
    let config: RunConfig = root
        .try_into()
        .map_err(|e| CliError::Config(format!("config: {e}")))?;
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

/// Set a dotted key, creating intermediate tables. The raw value is parsed
/// as TOML (numbers, booleans, arrays); anything unparsable is a string.
fn apply_override(root: &mut toml::Value, dotted: &str, raw: &str) -> Result<(), CliError> {
    let value = parse_scalar(raw);
    let mut node = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (ix, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {dotted}: {part} is not a table")))?;
        if ix == parts.len() - 1 {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    Err(CliError::Config(format!("override {dotted:?} has no key")))
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&wrapped) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("key v just parsed"),
        _ => toml::Value::String(raw.to_string()),
    }
}

/// Write the resolved config into the run directory as JSON.
pub fn echo_config(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut text = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::Runtime(format!("serialize config: {e}")))?;
    text.push('\n');
    std::fs::write(config_path(out_dir), text)
        .map_err(|e| CliError::Runtime(format!("write config.json: {e}")))?;
    Ok(())
}

pub fn config_path(out_dir: &Path) -> std::path::PathBuf {
    out_dir.join("config.json")
}

/// Read a previously echoed config.
pub fn load_echoed_config(out_dir: &Path) -> Result<RunConfig, CliError> {
    let path = config_path(out_dir);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
