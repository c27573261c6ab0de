//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use gridshap::dataset::EventClass;
use gridshap::gbt::Hyperparams;
use gridshap::preprocess::SplitSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Raw event CSV, or a binary cache written by `ingest`.
    pub input: PathBuf,
    /// Column names (one per line) to load, in order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub label_column: String,
    /// Rules mapping numeric scenario markers to classes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marker_map: Option<PathBuf>,
    pub strict_names: bool,
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    pub top_k: usize,
    pub background: usize,
    /// Dependence plots per pair, for the most important features.
    pub dependence_plots: usize,
    /// Test row used for the force and waterfall plots.
    pub explain_row: usize,
    pub waterfall_max_features: usize,
    pub beeswarm_max_display: usize,
    pub out_dir: PathBuf,
    pub pairs: Vec<[EventClass; 2]>,
    pub hyperparams: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("events.csv"),
            manifest: None,
            label_column: "marker".into(),
            marker_map: None,
            strict_names: false,
            seed: 42,
            train_fraction: 0.8,
            stratified: false,
            top_k: 10,
            background: 256,
            dependence_plots: 5,
            explain_row: 0,
            waterfall_max_features: gridshap::viz::WATERFALL_MAX_FEATURES,
            beeswarm_max_display: gridshap::viz::BEESWARM_MAX_DISPLAY,
            out_dir: PathBuf::from("out"),
            pairs: vec![
                [EventClass::Attack, EventClass::Natural],
                [EventClass::Natural, EventClass::NoEvent],
                [EventClass::Attack, EventClass::NoEvent],
            ],
            hyperparams: Hyperparams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Defaults with the optional keys shown as comments.
    pub fn defaults_text() -> String {
        let body = RunConfig::default().to_toml();
        let (top, rest) = match body.find("\n[") {
            Some(i) => body.split_at(i + 1),
            None => (body.as_str(), ""),
        };
        format!(
            "{top}# manifest = \"columns.txt\"\n# marker_map = \"markers.txt\"\n\n{rest}"
        )
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
            stratified: self.stratified,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.background == 0 {
            return bad("background must be at least 1".into());
        }
        if self.pairs.is_empty() {
            return bad("no pairs configured".into());
        }
        if let Some([a, _]) = self.pairs.iter().find(|[a, b]| a == b) {
            return bad(format!("pair {a:?}/{a:?} has a single class"));
        }
        self.hyperparams
            .validate()
            .or_else(|e| bad(e.to_string()))
    }
}

/// `attack_natural` style directory name for a pair, in code order.
pub fn pair_name(pair: [EventClass; 2]) -> String {
    let mut p = pair;
    p.sort();
    format!(
        "{}_{}",
        p[0].canonical_name().to_lowercase(),
        p[1].canonical_name().to_lowercase()
    )
}
