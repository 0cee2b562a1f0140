//! TOML experiment manifests with `KEY=VALUE` overrides.
//!
//! Precedence, lowest first: built-in defaults, the config file,
//! `--override` pairs in command-line order, then `--seed`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::CliError;

/// Keys shared by every command; stripped before the command-specific parse.
pub struct Manifest {
    pub table: Table,
    pub out: Option<PathBuf>,
}

pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>, command: &str) -> Result<Manifest, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("invalid config file {}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for pair in overrides {
        apply_override(&mut table, pair)?;
    }
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| CliError::Config(format!("seed {s} does not fit a TOML integer")))?;
        table.insert("seed".into(), Value::Integer(s));
    }
    if let Some(kind) = table.remove("experiment") {
        if kind.as_str() != Some(command) {
            return Err(CliError::Config(format!("config is for experiment {kind}, not `{command}`")));
        }
    }
    let out = match table.remove("out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => return Err(CliError::Config(format!("`out` must be a string, got {other}"))),
        None => None,
    };
    Ok(Manifest { table, out })
}

/// `a.b.c=value`; the value is read as a TOML literal, or as a bare string
/// when it does not parse as one.
pub fn apply_override(table: &mut Table, pair: &str) -> Result<(), CliError> {
    let (key, raw) = pair
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{pair}` is not KEY=VALUE")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{pair}` has an empty key")));
    }
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cursor = table;
    for part in parts {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{pair}`: `{part}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Deserialize `table` laid over `T::default()`, so a partial section keeps
/// the command's defaults for the keys it leaves out.
pub fn parse<T: DeserializeOwned + Serialize + Default>(table: Table) -> Result<T, CliError> {
    let mut base = Table::try_from(T::default())
        .map_err(|e| CliError::Config(format!("cannot encode defaults: {e}")))?;
    merge(&mut base, table);
    Value::Table(base)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("invalid configuration: {e}")))
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(inner)), Value::Table(sub)) => merge(inner, sub),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
