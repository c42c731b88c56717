//! Plain-text `key=value` configuration files.
//!
//! Keys are the dotted paths of a config type's serialized default
//! (`level1.k_domains`); any unambiguous trailing segment sequence also
//! works (`k_domains`). Blank lines and lines starting with `#` are
//! skipped. Values are typed by the default they replace; lists are
//! comma-separated. Fields named `seed` are reserved for `--seed`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{CliError, Result};

const RESERVED: &str = "seed";

struct Leaf {
    path: Vec<String>,
    default: Value,
}

fn leaves(value: &Value, prefix: &mut Vec<String>, out: &mut Vec<Leaf>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                prefix.push(k.clone());
                leaves(v, prefix, out);
                prefix.pop();
            }
        }
        _ => {
            if prefix.last().map(String::as_str) != Some(RESERVED) {
                out.push(Leaf {
                    path: prefix.clone(),
                    default: value.clone(),
                });
            }
        }
    }
}

fn default_tree<T: Serialize + Default>() -> Value {
    serde_json::to_value(T::default()).expect("config types serialize to JSON")
}

fn resolve<'a>(all: &'a [Leaf], key: &str) -> Result<&'a Leaf> {
    let wanted: Vec<&str> = key.split('.').collect();
    if wanted.last() == Some(&RESERVED) {
        return Err(CliError::key(key, "seeds are set with --seed"));
    }
    let matches: Vec<&Leaf> = all.iter().filter(|l| ends_with(&l.path, &wanted)).collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(CliError::key(key, "unknown key")),
        many => {
            if let Some(exact) = many.iter().find(|l| l.path.len() == wanted.len()) {
                return Ok(exact);
            }
            let names: Vec<String> = many.iter().map(|l| l.path.join(".")).collect();
            Err(CliError::key(
                key,
                format!("ambiguous; use one of {}", names.join(", ")),
            ))
        }
    }
}

fn ends_with(path: &[String], tail: &[&str]) -> bool {
    path.len() >= tail.len()
        && path[path.len() - tail.len()..]
            .iter()
            .zip(tail)
            .all(|(a, b)| a == b)
}

fn parse_scalar(key: &str, raw: &str, like: &Value) -> Result<Value> {
    let bad = |what: &str| CliError::key(key, format!("expected {what}, got {raw:?}"));
    match like {
        Value::Bool(_) => raw
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| bad("true or false")),
        Value::Number(n) if n.is_u64() => raw
            .parse::<u64>()
            .map(|v| Value::Number(v.into()))
            .map_err(|_| bad("a non-negative integer")),
        Value::Number(n) if n.is_i64() => raw
            .parse::<i64>()
            .map(|v| Value::Number(v.into()))
            .map_err(|_| bad("an integer")),
        Value::Number(_) => raw
            .parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map(Value::Number)
            .ok_or_else(|| bad("a finite number")),
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Null => {
            Ok(serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())))
        }
        Value::Array(_) | Value::Object(_) => Err(bad("a scalar")),
    }
}

fn parse_value(key: &str, raw: &str, like: &Value) -> Result<Value> {
    let Value::Array(items) = like else {
        return parse_scalar(key, raw, like);
    };
    if raw.is_empty() {
        return Ok(Value::Array(Vec::new()));
    }
    let element = items
        .first()
        .cloned()
        .unwrap_or_else(|| Value::Number(0.into()));
    raw.split(',')
        .map(|part| {
            let part = part.trim();
            match parse_scalar(key, part, &element) {
                Err(_) if element.is_u64() => parse_scalar(key, part, &Value::from(0.5)),
                other => other,
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn set(tree: &mut Value, path: &[String], value: Value) {
    let mut node = tree;
    for segment in &path[..path.len() - 1] {
        node = node
            .get_mut(segment)
            .expect("path comes from the default tree");
    }
    node[path[path.len() - 1].as_str()] = value;
}

/// Parse `key=value` text on top of `T::default()`.
pub fn parse_config<T>(text: &str) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut tree = default_tree::<T>();
    let mut all = Vec::new();
    leaves(&tree, &mut Vec::new(), &mut all);
    let mut seen = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            ))
        })?;
        let (key, raw) = (key.trim(), raw.trim());
        let leaf = resolve(&all, key)?;
        if seen.contains(&leaf.path) {
            return Err(CliError::key(key, "set more than once"));
        }
        seen.push(leaf.path.clone());
        set(&mut tree, &leaf.path, parse_value(key, raw, &leaf.default)?);
        serde_json::from_value::<T>(tree.clone()).map_err(|e| CliError::key(key, e.to_string()))?;
    }
    Ok(serde_json::from_value(tree)?)
}

/// Read a config file; `None` means all defaults.
pub fn load_config<T>(path: Option<&Path>) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::File {
                path: p.display().to_string(),
                source,
            })?;
            parse_config(&text)
        }
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Array(items) => items.iter().map(render_value).collect::<Vec<_>>().join(","),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Every key of `cfg` as `key=value` lines, parseable by [`parse_config`].
pub fn render_config<T: Serialize>(cfg: &T) -> String {
    let tree = serde_json::to_value(cfg).expect("config types serialize to JSON");
    let mut all = Vec::new();
    leaves(&tree, &mut Vec::new(), &mut all);
    all.iter()
        .map(|l| format!("{}={}\n", l.path.join("."), render_value(&l.default)))
        .collect()
}

/// Help text listing every key with its default.
pub fn describe_keys<T: Serialize + Default>() -> String {
    let mut out = String::from("Config keys (key=default):\n");
    for line in render_config(&T::default()).lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// JSON object view of a config for manifests.
pub fn config_json<T: Serialize>(cfg: &T) -> Value {
    let mut tree = serde_json::to_value(cfg).unwrap_or(Value::Object(Map::new()));
    strip_seeds(&mut tree);
    tree
}

fn strip_seeds(v: &mut Value) {
    if let Value::Object(map) = v {
        map.remove(RESERVED);
        for child in map.values_mut() {
            strip_seeds(child);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use domi_core::{DomiConfig, SamplerMethod, SynthConfig};

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: DomiConfig = parse_config("").unwrap();
        assert_eq!(cfg, DomiConfig::default());
        let cfg: DomiConfig = parse_config("# comment\n\n").unwrap();
        assert_eq!(cfg, DomiConfig::default());
    }

    #[test]
    fn short_and_dotted_keys() {
        let cfg: DomiConfig =
            parse_config("k_domains=7\nlevel2.batch_size=16\nerm.hidden_dims=8,4\nsampler=map")
                .unwrap();
        assert_eq!(cfg.level1.k_domains, 7);
        assert_eq!(cfg.level2.batch_size, 16);
        assert_eq!(cfg.level2.erm.hidden_dims, vec![8, 4]);
        assert_eq!(cfg.sampler, SamplerMethod::Map);
    }

    #[test]
    fn float_lists_and_empty_lists() {
        let cfg: SynthConfig = parse_config("test_angles=0,90.5\nnoise_std=0").unwrap();
        assert_eq!(cfg.test_angles, vec![0.0, 90.5]);
        assert_eq!(cfg.noise_std, 0.0);
        let cfg: DomiConfig = parse_config("level2.erm.hidden_dims=").unwrap();
        assert!(cfg.level2.erm.hidden_dims.is_empty());
    }

    #[test]
    fn errors_name_the_key() {
        let msg = |text: &str| parse_config::<DomiConfig>(text).unwrap_err().to_string();
        assert!(msg("k_domains=banana").contains("`k_domains`"));
        assert!(msg("bogus=1").contains("unknown key"));
        assert!(msg("epochs=3").contains("ambiguous"));
        assert!(msg("sampler=fancy").contains("`sampler`"));
        assert!(msg("seed=3").contains("--seed"));
        assert!(msg("k_domains=1\nk_domains=2").contains("more than once"));
        assert!(msg("no equals sign").contains("line 1"));
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = DomiConfig::default();
        cfg.level1.k_domains = 9;
        cfg.level2.erm.learning_rate = 0.1 + 0.2;
        let back: DomiConfig = parse_config(&render_config(&cfg)).unwrap();
        assert_eq!(back, cfg);
        let synth: SynthConfig = parse_config(&render_config(&SynthConfig::default())).unwrap();
        assert_eq!(synth, SynthConfig::default());
    }

    #[test]
    fn help_lists_defaults() {
        let help = describe_keys::<DomiConfig>();
        assert!(help.contains("level1.k_domains=5"));
        assert!(!help.contains("seed="));
    }
}
