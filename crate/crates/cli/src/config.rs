//! Properties-file configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use vmetrics_core::{FeatureType, Selection, WeightCatalog, WeightConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: expected `key = value`")]
    Syntax { origin: String, line: usize },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}` points to `{path}`, which does not exist or has the wrong type")]
    BadPath { key: &'static str, path: PathBuf },
}

/// Raw `key = value` pairs; later entries win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Properties {
    pub entries: BTreeMap<String, String>,
}

impl Properties {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut props = Properties::default();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            props.set_pair(line).map_err(|_| ConfigError::Syntax {
                origin: origin.to_string(),
                line: index + 1,
            })?;
        }
        Ok(props)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = pair.split_once('=').ok_or_else(|| ConfigError::Invalid {
            key: pair.to_string(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Invalid {
                key: pair.to_string(),
                message: "empty key".into(),
            });
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source_tree: PathBuf,
    pub feature_model: PathBuf,
    pub build_model: Option<PathBuf>,
    pub selection: Selection,
    pub output: PathBuf,
    pub parse_threads: usize,
    pub metric_threads: usize,
    pub strict_features: bool,
    pub weights: WeightConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "source_tree",
    "feature_model",
    "build_model",
    "output",
    "metrics.code_metrics",
    "metrics.function_measures.all_variations",
    "code.extractor.threads",
    "metrics.max_parallel_threads",
    "features.strict",
    "weights.hierarchy",
    "weights.locality.fallback",
];

impl RunConfig {
    /// Builds and validates the configuration. Relative paths are resolved
    /// against `base` (the directory of the config file).
    pub fn from_properties(props: &Properties, base: &Path) -> Result<Self, ConfigError> {
        for key in props.entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) && !key.starts_with("weights.types.") {
                log::warn!("ignoring unknown config key `{key}`");
            }
        }
        let path = |key: &'static str| props.get(key).map(|p| base.join(p));

        let source_tree = path("source_tree").ok_or(ConfigError::Missing("source_tree"))?;
        if !source_tree.is_dir() {
            return Err(ConfigError::BadPath {
                key: "source_tree",
                path: source_tree,
            });
        }
        let feature_model = path("feature_model").ok_or(ConfigError::Missing("feature_model"))?;
        if !feature_model.is_file() {
            return Err(ConfigError::BadPath {
                key: "feature_model",
                path: feature_model,
            });
        }
        let build_model = path("build_model");
        if let Some(p) = &build_model {
            if !p.is_file() {
                return Err(ConfigError::BadPath {
                    key: "build_model",
                    path: p.clone(),
                });
            }
        }
        let output = path("output").ok_or(ConfigError::Missing("output"))?;

        let families = props.get("metrics.code_metrics");
        let single = props.get("metrics.function_measures.all_variations");
        let selection = match (families, single) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    key: "metrics.function_measures.all_variations".into(),
                    message: "cannot be combined with metrics.code_metrics".into(),
                })
            }
            (Some(list), None) => Selection::families(list).map_err(|e| ConfigError::Invalid {
                key: "metrics.code_metrics".into(),
                message: e.to_string(),
            })?,
            (None, Some(name)) => Selection::Single(name.to_string()),
            (None, None) => Selection::All,
        };
        vmetrics_core::enumerate_variants(&selection, &WeightCatalog::IDS).map_err(|e| ConfigError::Invalid {
            key: "metrics".into(),
            message: e.to_string(),
        })?;

        Ok(RunConfig {
            source_tree,
            feature_model,
            build_model,
            selection,
            output,
            parse_threads: threads(props, "code.extractor.threads")?,
            metric_threads: threads(props, "metrics.max_parallel_threads")?,
            strict_features: flag(props, "features.strict")?,
            weights: weights(props)?,
        })
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

fn threads(props: &Properties, key: &str) -> Result<usize, ConfigError> {
    match props.get(key) {
        None => Ok(1),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(invalid(key, format!("`{v}` is not a thread count >= 1"))),
        },
    }
}

fn flag(props: &Properties, key: &str) -> Result<bool, ConfigError> {
    match props.get(key) {
        None => Ok(false),
        Some(v) => match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(invalid(key, format!("`{v}` is not a boolean"))),
        },
    }
}

fn number(key: &str, text: &str) -> Result<f64, ConfigError> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(invalid(key, format!("`{text}` is not a number >= 0"))),
    }
}

fn weights(props: &Properties) -> Result<WeightConfig, ConfigError> {
    let mut config = WeightConfig::default();
    for (key, value) in &props.entries {
        if let Some(name) = key.strip_prefix("weights.types.") {
            let ftype: FeatureType = name.parse().map_err(|m: String| invalid(key, m))?;
            config.type_weights.insert(ftype, number(key, value)?);
        }
    }
    if let Some(v) = props.get("weights.hierarchy") {
        let parts: Vec<&str> = v.split(',').collect();
        let [top, mid, leaf] = parts.as_slice() else {
            return Err(invalid("weights.hierarchy", "expected <top>,<mid>,<leaf>"));
        };
        config.hierarchy_weights = (
            number("weights.hierarchy", top)?,
            number("weights.hierarchy", mid)?,
            number("weights.hierarchy", leaf)?,
        );
    }
    if let Some(v) = props.get("weights.locality.fallback") {
        config.locality_fallback = number("weights.locality.fallback", v)?;
    }
    Ok(config)
}
