//! Config files and `--set` overrides, turned into layers for
//! [`TrainConfig::resolve`].

use std::path::Path;

use anyhow::{Context, Result};
use helprank::corpus::LabelConfig;
use helprank::Error;
use serde_json::{Map, Value};

pub type Layer = Vec<(String, Value)>;

/// Reads a config file: a JSON object (nested objects become dotted keys) or
/// flat `key = value` lines with `#` comments.
pub fn read_layer(path: &Path) -> Result<Layer> {
    let text = std::fs::read_to_string(path)
        .map_err(Error::Io)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_layer(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_layer(text: &str) -> Result<Layer> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let root: Map<String, Value> = serde_json::from_str(trimmed).map_err(Error::Json)?;
        let mut out = Vec::new();
        flatten("", root, &mut out);
        return Ok(out);
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_assignment(line).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Parses `key=value` (or `key = value`); the value stays a string and is
/// typed later against the field it lands in.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim().trim_matches('"'));
    if k.is_empty() {
        return Err(format!("missing key in `{s}`"));
    }
    Ok((k.to_string(), Value::String(v.to_string())))
}

fn flatten(prefix: &str, map: Map<String, Value>, out: &mut Layer) {
    for (k, v) in map {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            // the subword hasher is a leaf object in the config
            Value::Object(m) if !key.ends_with("hasher") => flatten(&key, m, out),
            v => out.push((key, v)),
        }
    }
}

/// Applies layers to the labeling rule, earlier layers first.
pub fn label_config(layers: &[Layer]) -> Result<LabelConfig> {
    let mut root = serde_json::to_value(LabelConfig::default())?;
    for (key, value) in layers.iter().flatten() {
        let slot = root.get_mut(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        *slot = match value {
            Value::String(s) => serde_json::from_str(s).unwrap_or(value.clone()),
            v => v.clone(),
        };
    }
    Ok(serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))?)
}

/// A layer from the flags that were actually given.
pub fn flag_layer(pairs: &[(&str, Option<Value>)]) -> Layer {
    pairs.iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
}
