use std::path::{Path, PathBuf};

use ecofin_core::{Error, SimConfig};
use serde_json::{json, Value};

/// Directory searched for relative `--config` paths and for `default.toml`.
pub const CONFIG_DIR_VAR: &str = "ECOFIN_CONFIG_DIR";

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Generation(_) | Error::Index { .. } => 2,
        Error::Graph(_) => 4,
        _ => 3,
    }
}

fn config_dir() -> Option<PathBuf> {
    std::env::var_os(CONFIG_DIR_VAR).map(PathBuf::from)
}

/// Locates the config file: the path as given, else relative to the config
/// directory. Without `--config`, `default.toml` in the config directory is
/// used when it exists.
pub fn resolve_config(path: Option<&Path>) -> Result<Option<PathBuf>, Error> {
    match path {
        Some(p) if p.exists() => Ok(Some(p.to_path_buf())),
        Some(p) => {
            if p.is_relative() {
                if let Some(dir) = config_dir() {
                    let cand = dir.join(p);
                    if cand.exists() {
                        return Ok(Some(cand));
                    }
                }
            }
            Err(Error::Config(format!("config file {} not found", p.display())))
        }
        None => Ok(config_dir()
            .map(|d| d.join("default.toml"))
            .filter(|p| p.exists())),
    }
}

/// File config with overrides applied, plus the file it came from.
pub fn effective_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<(SimConfig, Option<PathBuf>), Error> {
    let file = resolve_config(path)?;
    let base = match &file {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    Ok((base.with_overrides(overrides)?, file))
}

/// `a..b` inclusive, or a single seed. Seeds are positive.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, Error> {
    let bad = |why: &str| Error::Config(format!("seed range `{spec}`: {why}"));
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse::<u64>(), b.trim().parse::<u64>())
        }
        None => (spec.trim().parse::<u64>(), spec.trim().parse::<u64>()),
    };
    let (lo, hi) = (lo.map_err(|_| bad("not an integer"))?, hi.map_err(|_| bad("not an integer"))?);
    if lo == 0 {
        return Err(bad("seeds must be positive"));
    }
    if hi < lo {
        return Err(bad("the range is empty"));
    }
    Ok((lo..=hi).collect())
}

pub fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    ecofin_core::engine::export::write_text(path, &text)
}

pub fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect()
}

/// Common manifest envelope. `settings` is the effective configuration of
/// the command, `details` anything command specific.
pub fn manifest(command: &str, settings: Value, outputs: &[PathBuf], details: Value) -> Value {
    json!({
        "tool": "ecofin",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": settings,
        "outputs": file_names(outputs),
        "details": details,
    })
}

pub fn config_json(cfg: &SimConfig, file: Option<&Path>) -> Result<Value, Error> {
    Ok(json!({
        "file": file.map(|p| p.display().to_string()),
        "effective": serde_json::to_value(cfg)?,
        "toml": cfg.to_toml_string(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("1..1").unwrap(), vec![1]);
        assert_eq!(parse_seeds("4..=5").unwrap(), vec![4, 5]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("0..2").is_err());
        assert!(parse_seeds("x..2").is_err());
    }

    #[test]
    fn codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Data("x".into())), 3);
        assert_eq!(exit_code(&Error::Graph("x".into())), 4);
        assert_eq!(exit_code(&Error::MissingRate("x".into())), 3);
    }
}
