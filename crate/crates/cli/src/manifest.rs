use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

/// Record written next to every command's outputs. `config` holds the
/// effective settings after layering flags, the config file and defaults, so
/// pasting `config.args` into a config file section reruns the command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Drop unset (`null`) entries so the object reads like a config section.
fn strip_nulls(v: &mut serde_json::Value) {
    if let serde_json::Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        map.values_mut().for_each(strip_nulls);
    }
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, mut config: serde_json::Value, started: String) -> Self {
        strip_nulls(&mut config);
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            started,
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(mut self, path: &Path) -> anyhow::Result<()> {
        self.finished = now();
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, text + "\n").map_err(|e| crate::io_error(path, e))?;
        Ok(())
    }
}
