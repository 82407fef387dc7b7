//! Interpreter configurations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT_SECS: f64 = 10.0;
pub const DEFAULT_INSTALL_TIMEOUT_SECS: f64 = 120.0;
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 64 * 1024;

/// One interpreter to evaluate snippets under.
///
/// `command` must contain a `{file}` argument (the script path);
/// `installer_command` a `{module}` argument. `{config_dir}` in either is
/// replaced by the directory of the file the config was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpreterConfig {
    pub id: String,
    pub command: Vec<String>,
    #[serde(default)]
    pub installer_command: Vec<String>,
    #[serde(default)]
    pub env_overrides: BTreeMap<String, String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_install_timeout")]
    pub install_timeout_secs: f64,
    #[serde(default = "default_max_output")]
    pub max_output_bytes: usize,
    #[serde(default = "default_max_installs")]
    pub max_installs: usize,
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}
fn default_install_timeout() -> f64 {
    DEFAULT_INSTALL_TIMEOUT_SECS
}
fn default_max_output() -> usize {
    DEFAULT_MAX_OUTPUT_BYTES
}
fn default_max_installs() -> usize {
    snipex_core::resolve::DEFAULT_MAX_INSTALLS
}

impl InterpreterConfig {
    pub fn new(id: impl Into<String>, command: &[&str]) -> Self {
        InterpreterConfig {
            id: id.into(),
            command: command.iter().map(|s| s.to_string()).collect(),
            installer_command: Vec::new(),
            env_overrides: BTreeMap::new(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            install_timeout_secs: DEFAULT_INSTALL_TIMEOUT_SECS,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
            max_installs: default_max_installs(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn install_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.install_timeout_secs)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("interpreter {:?}: {msg}", self.id)));
        if self.id.is_empty() {
            return bad("empty id");
        }
        if self.command.is_empty() {
            return bad("empty command");
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad("timeout must be positive");
        }
        if !(self.install_timeout_secs > 0.0 && self.install_timeout_secs.is_finite()) {
            return bad("install timeout must be positive");
        }
        if self.max_output_bytes == 0 {
            return bad("max_output_bytes must be positive");
        }
        if self.max_installs == 0 {
            return bad("max_installs must be at least 1");
        }
        Ok(())
    }

    fn expand_config_dir(&mut self, dir: &str) {
        for arg in self.command.iter_mut().chain(self.installer_command.iter_mut()) {
            *arg = arg.replace("{config_dir}", dir);
        }
        for value in self.env_overrides.values_mut() {
            *value = value.replace("{config_dir}", dir);
        }
    }
}

/// Check a config list: non-empty, each valid, ids distinct.
pub fn validate_all(configs: &[InterpreterConfig]) -> Result<()> {
    if configs.is_empty() {
        return Err(Error::Config("no interpreter configurations".into()));
    }
    let mut seen = BTreeSet::new();
    for c in configs {
        c.validate()?;
        if !seen.insert(c.id.as_str()) {
            return Err(Error::Config(format!("duplicate interpreter id {:?}", c.id)));
        }
    }
    Ok(())
}

/// Read a JSON array of configurations.
pub fn load_configs(path: &Path) -> Result<Vec<InterpreterConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut configs: Vec<InterpreterConfig> = serde_json::from_str(&text)?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let dir = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
    for c in &mut configs {
        c.expand_config_dir(&dir.to_string_lossy());
    }
    validate_all(&configs)?;
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("configs.json");
        std::fs::write(
            &path,
            r#"[{"id": "py2", "command": ["python3", "{config_dir}/shim.py", "{file}"]},
                {"id": "py3", "command": ["python3", "{file}"], "timeout_secs": 2.5}]"#,
        )
        .unwrap();
        let configs = load_configs(&path).unwrap();
        assert_eq!(configs[0].timeout(), Duration::from_secs(10));
        assert_eq!(configs[0].max_output_bytes, 65536);
        assert_eq!(configs[0].max_installs, 5);
        assert!(configs[0].command[1].ends_with("/shim.py"));
        assert!(!configs[0].command[1].contains("{config_dir}"));
        assert_eq!(configs[1].timeout(), Duration::from_millis(2500));
    }

    #[test]
    fn rejects_bad_lists() {
        let a = InterpreterConfig::new("a", &["x"]);
        assert!(validate_all(&[]).is_err());
        assert!(validate_all(&[a.clone(), a.clone()]).is_err());
        let mut z = a.clone();
        z.timeout_secs = 0.0;
        assert!(validate_all(&[z]).is_err());
        assert!(validate_all(&[a]).is_ok());
    }
}
