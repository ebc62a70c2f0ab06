//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Frequency units for inputs and reported outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Angular frequency, ns⁻¹.
    #[default]
    NsInv,
    /// Ordinary frequency ν = ω/(2π), MHz.
    Mhz,
}

impl Units {
    /// Converts an angular ns⁻¹ value into these units.
    pub fn from_angular(self, w: f64) -> f64 {
        match self {
            Units::NsInv => w,
            Units::Mhz => w / (2.0 * std::f64::consts::PI) * 1e3,
        }
    }

    /// Converts a value in these units into angular ns⁻¹.
    pub fn to_angular(self, v: f64) -> f64 {
        match self {
            Units::NsInv => v,
            Units::Mhz => v * 2.0 * std::f64::consts::PI * 1e-3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Units::NsInv => "ns^-1 (angular)",
            Units::Mhz => "MHz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Settings shared by every command. Only `units` changes numeric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub units: Units,
    /// Worker threads; `RINGTHETA_THREADS` takes precedence.
    pub threads: Option<usize>,
}

impl Default for Common {
    fn default() -> Self {
        Common { out_dir: PathBuf::from("out"), formats: vec![Format::Csv], units: Units::default(), threads: None }
    }
}

const COMMON_KEYS: [&str; 4] = ["out_dir", "formats", "units", "threads"];

/// A fully resolved run: shared settings plus the command's parameters.
#[derive(Debug, Clone)]
pub struct RunConfig<C> {
    pub command: &'static str,
    pub common: Common,
    pub params: C,
}

impl<C: Serialize + DeserializeOwned + Default> RunConfig<C> {
    /// Layers `defaults ← file ← flags`. `flags` holds only options given on
    /// the command line.
    pub fn resolve(command: &'static str, file: Option<&Path>, common_flags: Value, flags: Value) -> Result<Self, CliError> {
        let mut merged = serde_json::to_value(C::default()).expect("defaults serialize");
        let from_file = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if !v.is_object() {
                    return Err(CliError::Config(format!("{}: config must be a JSON object", path.display())));
                }
                v
            }
            None => Value::Object(Map::new()),
        };
        overlay(&mut merged, from_file);
        overlay(&mut merged, common_flags);
        overlay(&mut merged, flags);
        let Value::Object(mut all) = merged else { unreachable!("defaults are an object") };

        let mut common_map = Map::new();
        for key in COMMON_KEYS {
            if let Some(v) = all.remove(key) {
                common_map.insert(key.into(), v);
            }
        }
        let mut common_value = serde_json::to_value(Common::default()).expect("Common serializes");
        overlay(&mut common_value, Value::Object(common_map));
        let common: Common =
            serde_json::from_value(common_value).map_err(|e| CliError::Config(format!("shared settings: {e}")))?;
        let params: C =
            serde_json::from_value(Value::Object(all)).map_err(|e| CliError::Config(format!("{command}: {e}")))?;
        Ok(RunConfig { command, common, params })
    }

    /// Everything that determines the numeric output: the command, its
    /// parameters and the output units.
    pub fn semantic_value(&self) -> Value {
        serde_json::json!({
            "command": self.command,
            "params": self.params,
            "units": self.common.units,
        })
    }

    /// SHA-256 of the canonical (key-sorted, compact) semantic JSON.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.semantic_value()).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The flat form accepted back by `--config`.
    pub fn to_file_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.params).expect("config serializes");
        let common = serde_json::to_value(&self.common).expect("config serializes");
        overlay(&mut v, common);
        v
    }
}

/// Recursively overwrites `base` with the entries of `top`; objects merge,
/// anything else replaces. Tagged objects of a different `kind` replace
/// rather than merge.
pub fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if b.get("kind") == t.get("kind") || t.get("kind").is_none() => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Serializes flag structs, dropping unset options.
pub fn flags_value<T: Serialize>(flags: &T) -> Value {
    let mut v = serde_json::to_value(flags).expect("flags serialize");
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct P {
        a: f64,
        #[serde(default)]
        b: usize,
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("ringtheta-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"a": 1.0, "b": 3, "units": "mhz"}"#).unwrap();
        let rc: RunConfig<P> =
            RunConfig::resolve("t", Some(&path), Value::Object(Map::new()), serde_json::json!({"a": 2.0})).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(rc.params, P { a: 2.0, b: 3 });
        assert_eq!(rc.common.units, Units::Mhz);
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let mk = |a: f64, out: &str| RunConfig {
            command: "t",
            common: Common { out_dir: out.into(), ..Default::default() },
            params: P { a, b: 0 },
        };
        assert_eq!(mk(1.0, "x").hash(), mk(1.0, "y").hash());
        assert_ne!(mk(1.0, "x").hash(), mk(1.5, "x").hash());
        assert_eq!(mk(1.0, "x").hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let r: Result<RunConfig<P>, _> =
            RunConfig::resolve("t", None, Value::Object(Map::new()), serde_json::json!({"a": 1.0, "zzz": 1}));
        assert!(matches!(r, Err(CliError::Config(_))));
    }

    #[test]
    fn tagged_objects_replace_on_kind_change() {
        let mut base = serde_json::json!({"initial": {"kind": "delta", "site": 0}, "x": {"a": 1, "b": 2}});
        overlay(&mut base, serde_json::json!({"initial": {"kind": "cosine_power", "alpha": 4.0}, "x": {"b": 3}}));
        assert_eq!(base["initial"], serde_json::json!({"kind": "cosine_power", "alpha": 4.0}));
        assert_eq!(base["x"], serde_json::json!({"a": 1, "b": 3}));
        overlay(&mut base, serde_json::json!({"initial": {"kind": "cosine_power", "alpha": 2.0}}));
        assert_eq!(base["initial"]["alpha"], 2.0);
    }

    #[test]
    fn mhz_round_trip() {
        let w = 0.00135;
        assert!((Units::Mhz.to_angular(Units::Mhz.from_angular(w)) - w).abs() < 1e-18);
        assert!((Units::Mhz.from_angular(2.0 * std::f64::consts::PI * 1e-3) - 1.0).abs() < 1e-12);
    }
}
