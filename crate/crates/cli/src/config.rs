//! Layered run configuration: defaults, then `--config FILE`, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use oneshot_core::kg::Split;
use oneshot_core::predictor::PredictorConfig;
use oneshot_core::sampler::{Heuristic, SamplerConfig};
use oneshot_core::search::{BilevelConfig, BoConfig};
use oneshot_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

/// A configuration problem attributable to one key.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(key: impl Into<String>, message: impl Into<String>) -> anyhow::Error {
    ConfigError { key: key.into(), message: message.into() }.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub split: String,
    pub max_queries: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { split: "test".into(), max_queries: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    pub split: String,
    pub heuristics: Vec<String>,
    pub ratios: Vec<f64>,
}

impl Default for CoverageSection {
    fn default() -> Self {
        CoverageSection {
            split: "test".into(),
            heuristics: Heuristic::ALL.iter().map(|h| h.to_string()).collect(),
            ratios: vec![0.1, 0.2, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub entity_ratios: Vec<f64>,
    pub edge_ratios: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let grid = vec![0.05, 0.1, 0.2, 0.5, 1.0];
        SweepSection { entity_ratios: grid.clone(), edge_ratios: grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub predictor_budget: usize,
    pub sampler_budget: usize,
    pub warm_start: usize,
    pub candidates: usize,
    pub trees: usize,
    /// Epochs per predictor trial.
    pub trial_epochs: usize,
    /// Retrain the stage-1 winner for this many epochs before stage 2.
    pub final_epochs: Option<usize>,
    pub per_relation: bool,
    pub seed: u64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let bo = BoConfig::default();
        SearchSection {
            predictor_budget: 10,
            sampler_budget: 10,
            warm_start: bo.warm_start,
            candidates: bo.candidates,
            trees: bo.forest.trees,
            trial_epochs: 3,
            final_epochs: None,
            per_relation: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct SampleSection {
    /// Anchor entity, by name.
    pub entity: Option<String>,
    /// Query relation, by name.
    pub relation: Option<String>,
}


/// Everything a run depends on besides the dataset bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Checkpoint read by `eval` and `sweep`.
    pub checkpoint: Option<PathBuf>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub threads: usize,
    pub sampler: SamplerConfig,
    pub predictor: PredictorConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub coverage: CoverageSection,
    pub sweep: SweepSection,
    pub search: SearchSection,
    pub sample: SampleSection,
}


/// Sets `path` (dot-separated) in a TOML table, creating tables on the way.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_error(path, "empty key"))?;
    let mut table = root;
    for p in parts {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| config_error(path, format!("`{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Offending key of a serde error such as "unknown field `x`".
/// Deserializes a merged table, naming the dotted key of the first error.
fn from_table(table: toml::Table) -> anyhow::Result<RunConfig> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        let key = if path == "." { "config".to_string() } else { path };
        config_error(key, msg)
    })
}

impl RunConfig {
    /// Layers `file` and then `overrides` over the defaults.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, toml::Value)]) -> anyhow::Result<Self> {
        let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let parsed: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| config_error(path.display().to_string(), e.message().to_string()))?;
            // Validate the file on its own so the error names its key.
            from_table(parsed.clone())?;
            merge(&mut table, parsed);
        }
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        let cfg = from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let wrap = |section: &str, e: oneshot_core::Error| match e {
            oneshot_core::Error::Config { key, message } => config_error(format!("{section}.{key}"), message),
            other => config_error(section, other.to_string()),
        };
        self.sampler.validate().map_err(|e| wrap("sampler", e))?;
        self.predictor.validate().map_err(|e| wrap("predictor", e))?;
        self.train.validate().map_err(|e| wrap("train", e))?;
        self.eval_split()?;
        self.coverage_split()?;
        self.heuristics()?;
        for &r in self.coverage.ratios.iter().chain(&self.sweep.entity_ratios).chain(&self.sweep.edge_ratios) {
            if !(r > 0.0 && r <= 1.0) {
                return Err(config_error("ratios", format!("{r} outside (0, 1]")));
            }
        }
        if self.search.predictor_budget == 0 {
            return Err(config_error("search.predictor_budget", "must be at least 1"));
        }
        if self.search.sampler_budget == 0 {
            return Err(config_error("search.sampler_budget", "must be at least 1"));
        }
        Ok(())
    }

    fn parse_split(key: &str, s: &str) -> anyhow::Result<Split> {
        s.parse::<Split>().map_err(|_| config_error(key, format!("unknown split `{s}`")))
    }

    pub fn eval_split(&self) -> anyhow::Result<Split> {
        Self::parse_split("eval.split", &self.eval.split)
    }

    pub fn coverage_split(&self) -> anyhow::Result<Split> {
        Self::parse_split("coverage.split", &self.coverage.split)
    }

    pub fn heuristics(&self) -> anyhow::Result<Vec<Heuristic>> {
        self.coverage
            .heuristics
            .iter()
            .map(|h| h.parse::<Heuristic>().map_err(|_| config_error("coverage.heuristics", format!("unknown heuristic `{h}`"))))
            .collect()
    }

    pub fn bilevel(&self) -> BilevelConfig {
        let s = &self.search;
        let bo = |budget: usize, stream: u64| BoConfig {
            budget,
            warm_start: s.warm_start,
            candidates: s.candidates,
            forest: oneshot_core::search::ForestConfig { trees: s.trees, ..Default::default() },
            seed: oneshot_core::seed::derive(s.seed, &[stream]),
        };
        BilevelConfig {
            sampler: self.sampler.clone(),
            predictor: self.predictor.clone(),
            trial: TrainConfig { epochs: s.trial_epochs, ..self.train.clone() },
            final_epochs: s.final_epochs,
            predictor_bo: bo(s.predictor_budget, 1),
            sampler_bo: bo(s.sampler_budget, 2),
            per_relation: s.per_relation,
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = RunConfig::resolve(None, &[("sampler.entity_ratio".into(), parse_value("0.3"))]).unwrap();
        assert_eq!(c.sampler.entity_ratio, 0.3);
        let err = RunConfig::resolve(None, &[("sampler.entity_ratoi".into(), parse_value("0.3"))]).unwrap_err();
        assert_eq!(err.downcast_ref::<ConfigError>().unwrap().key, "sampler.entity_ratoi");
        let err = RunConfig::resolve(None, &[("sampler.entity_ratio".into(), parse_value("2.0"))]).unwrap_err();
        assert_eq!(err.downcast_ref::<ConfigError>().unwrap().key, "sampler.entity_ratio");
    }

    #[test]
    fn bare_strings_parse() {
        assert_eq!(parse_value("ppr"), toml::Value::String("ppr".into()));
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("[0.1, 0.2]").as_array().unwrap().len(), 2);
    }
}
