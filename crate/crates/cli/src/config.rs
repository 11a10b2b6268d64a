//! Flat TOML config layered under command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    table: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        match serde_json::to_value(table)? {
            Value::Object(table) => Ok(Self { table }),
            _ => unreachable!("a TOML document is a table"),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.table
            .get(key)
            .map(|v| serde_json::from_value(v.clone()).with_context(|| format!("config key `{key}`")))
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }

    /// `base` with matching file keys applied, then every non-null field of
    /// `overrides`. Field names are shared across all three layers.
    pub fn layer<T: Serialize + DeserializeOwned>(&self, base: &T, overrides: &impl Serialize) -> Result<T> {
        let Value::Object(mut merged) = serde_json::to_value(base)? else {
            anyhow::bail!("config layer must be a struct");
        };
        let known: Vec<String> = merged.keys().cloned().collect();
        for key in &known {
            if let Some(v) = self.table.get(key) {
                merged.insert(key.clone(), v.clone());
            }
        }
        if let Value::Object(flags) = serde_json::to_value(overrides)? {
            for (k, v) in flags {
                if !v.is_null() {
                    merged.insert(k, v);
                }
            }
        }
        serde_json::from_value(Value::Object(merged)).context("invalid configuration value")
    }
}
