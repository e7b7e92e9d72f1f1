//! Run configuration: a JSON document with snake_case fields, plus
//! command-line overrides that win over the file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use imputelab_core::impute::{AutoencoderConfig, InitialImputer};
use imputelab_core::pipeline::{LeakageMode, PredictorSpec, SynthConfig, WeekAggregation};
use imputelab_core::{AmputationConfig, AmputationKind, FeatureSet, Strategy, StrategySpec};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::csvio::WideCsvSchema;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Availability,
    Ampute,
    Impute,
    Reconstruct,
    Predict,
    Realtime,
    McarTest,
    Synth,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Availability => "availability",
            Task::Ampute => "ampute",
            Task::Impute => "impute",
            Task::Reconstruct => "reconstruct",
            Task::Predict => "predict",
            Task::Realtime => "realtime",
            Task::McarTest => "mcar-test",
            Task::Synth => "synth",
        }
    }
}

/// A catalogue strategy with its report label. Serialised as the spec's
/// object with an extra optional `name` key.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyEntry {
    pub name: String,
    pub spec: StrategySpec,
}

impl StrategyEntry {
    pub fn new(spec: StrategySpec) -> Self {
        Self {
            name: spec.default_name(),
            spec,
        }
    }

    pub fn strategy(&self) -> Strategy {
        Strategy::named(self.name.clone(), self.spec.clone())
    }

    fn from_value(mut v: Value) -> Result<Self, String> {
        let obj = v.as_object_mut().ok_or("expected an object")?;
        let name = match obj.remove("name") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err("name: expected a string".into()),
        };
        let spec: StrategySpec = serde_json::from_value(v).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("variant") || msg.contains("`kind`") {
                format!("kind: {msg}")
            } else {
                msg
            }
        })?;
        Ok(Self {
            name: name.unwrap_or_else(|| spec.default_name()),
            spec,
        })
    }
}

impl Serialize for StrategyEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut v = serde_json::to_value(&self.spec).map_err(serde::ser::Error::custom)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("name".into(), Value::String(self.name.clone()));
        }
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StrategyEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        StrategyEntry::from_value(Value::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// The default line-up; the windowed-median baseline comes first so paired
/// tests compare every other strategy against it.
pub fn default_strategies() -> Vec<StrategyEntry> {
    let ae_median = AutoencoderConfig::default();
    [
        StrategySpec::WindowedMedian(Default::default()),
        StrategySpec::GlobemCProxy(Default::default()),
        StrategySpec::Median,
        StrategySpec::SimpleKnn(Default::default()),
        StrategySpec::BoundedKnn(Default::default()),
        StrategySpec::Mice(Default::default()),
        StrategySpec::SoftImpute(Default::default()),
        StrategySpec::Autoencoder(ae_median),
        StrategySpec::Autoencoder(AutoencoderConfig {
            initial_imputer: InitialImputer::SimpleKnn,
            ..AutoencoderConfig::default()
        }),
    ]
    .into_iter()
    .map(StrategyEntry::new)
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmputationSettings {
    pub kind: AmputationKind,
    pub r: f64,
    /// Falls back to the global seed.
    pub seed: Option<u64>,
}

impl Default for AmputationSettings {
    fn default() -> Self {
        Self {
            kind: AmputationKind::Mcar,
            r: 10.0,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths resolve against the config file's directory.
    pub dataset: Option<PathBuf>,
    pub schema: WideCsvSchema,
    /// Generates the dataset when no `dataset` path is given.
    pub synth: Option<SynthConfig>,
    pub features: Option<Vec<String>>,
    pub strategies: Vec<StrategyEntry>,
    pub amputation: AmputationSettings,
    pub task: Option<Task>,
    pub leakage: LeakageMode,
    pub train_fraction: f64,
    pub aggregation: WeekAggregation,
    pub predictor: PredictorSpec,
    pub alpha: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            schema: WideCsvSchema::default(),
            synth: None,
            features: None,
            strategies: Vec::new(),
            amputation: AmputationSettings::default(),
            task: None,
            leakage: LeakageMode::Full,
            train_fraction: 0.8,
            aggregation: WeekAggregation::Mean,
            predictor: PredictorSpec::default(),
            alpha: 0.05,
            seed: 0,
            out_dir: None,
        }
    }
}

/// Command-line values that replace the corresponding config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub features: Option<Vec<String>>,
    /// Keeps only the named strategies, in the given order.
    pub strategy: Option<Vec<String>>,
    pub r: Option<f64>,
    pub leakage: Option<LeakageMode>,
}

impl RunConfig {
    /// Parses a config document. Strategy errors name the offending entry,
    /// e.g. `strategies[2].kind`.
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let doc: Value = serde_json::from_str(s).map_err(|e| ConfigError(format!("config: {e}")))?;
        if let Some(Value::Array(entries)) = doc.get("strategies") {
            for (i, entry) in entries.iter().enumerate() {
                StrategyEntry::from_value(entry.clone()).map_err(|e| ConfigError(format!("strategies[{i}].{e}")))?;
            }
        }
        serde_json::from_value(doc).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        if let Some(d) = &cfg.dataset {
            if d.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.dataset = Some(dir.join(d));
                }
            }
        }
        Ok(cfg)
    }

    /// Applies overrides, fills the default strategy line-up and validates.
    /// A `--seed` override also replaces the amputation and synth seeds so
    /// every stochastic stream follows it.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, ConfigError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
            self.amputation.seed = None;
            if let Some(s) = &mut self.synth {
                s.seed = seed;
            }
        }
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
        if let Some(f) = &o.features {
            self.features = Some(f.clone());
        }
        if let Some(r) = o.r {
            self.amputation.r = r;
        }
        if let Some(l) = o.leakage {
            self.leakage = l;
        }
        if self.strategies.is_empty() {
            self.strategies = default_strategies();
        }
        if let Some(names) = &o.strategy {
            let mut picked = Vec::with_capacity(names.len());
            for n in names {
                let e = self
                    .strategies
                    .iter()
                    .find(|e| &e.name == n || e.spec.kind_name().eq_ignore_ascii_case(n))
                    .ok_or_else(|| ConfigError(format!("--strategy: no configured strategy named `{n}`")))?;
                picked.push(e.clone());
            }
            self.strategies = picked;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        let mut seen = BTreeSet::new();
        for (i, e) in self.strategies.iter().enumerate() {
            if e.name.is_empty() {
                return err(format!("strategies[{i}].name: must not be empty"));
            }
            if !seen.insert(e.name.as_str()) {
                return err(format!("strategies[{i}].name: duplicate strategy name `{}`", e.name));
            }
            if let Err(x) = e.spec.validate() {
                return err(format!("strategies[{i}]: {x}"));
            }
        }
        if !(self.amputation.r > 0.0 && self.amputation.r < 100.0) {
            return err(format!("amputation.r: {} is outside (0, 100)", self.amputation.r));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return err(format!("train_fraction: {} is outside (0, 1)", self.train_fraction));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return err(format!("alpha: {} is outside (0, 1)", self.alpha));
        }
        match &self.predictor {
            PredictorSpec::BaselineLogistic(c) => {
                if let Err(m) = c.validate() {
                    return err(format!("predictor: {m}"));
                }
            }
            PredictorSpec::External { command } => {
                if command.is_empty() {
                    return err("predictor.command: must not be empty".into());
                }
            }
        }
        if let Some(f) = &self.features {
            if f.is_empty() {
                return err("features: must not be empty".into());
            }
            FeatureSet::new(f.iter().map(String::as_str)).map_err(|e| ConfigError(format!("features: {e}")))?;
        }
        if let Some(s) = &self.synth {
            s.validate().map_err(|m| ConfigError(format!("synth: {m}")))?;
        }
        Ok(())
    }

    pub fn amputation_config(&self) -> AmputationConfig {
        AmputationConfig::new(self.amputation.kind, self.amputation.r, self.amputation.seed.unwrap_or(self.seed))
    }

    pub fn strategy_set(&self) -> Vec<Strategy> {
        self.strategies.iter().map(StrategyEntry::strategy).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_kind_names_field() {
        let e = RunConfig::from_json_str(r#"{"strategies":[{"kind":"MEDIAN"},{"kind":"MAGIC"}]}"#).unwrap_err();
        assert!(e.0.starts_with("strategies[1].kind:"), "{e}");
    }

    #[test]
    fn named_strategy_round_trips() {
        let cfg = RunConfig::from_json_str(r#"{"strategies":[{"kind":"SIMPLE_KNN","k":3,"name":"knn3"}]}"#).unwrap();
        assert_eq!(cfg.strategies[0].name, "knn3");
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::from_json_str(r#"{"seed":1,"amputation":{"kind":"MNAR_TAILS","r":5,"seed":9},"leakage":"full"}"#)
            .unwrap();
        let o = Overrides {
            seed: Some(2),
            r: Some(20.0),
            leakage: Some(LeakageMode::TrainOnly),
            strategy: Some(vec!["median".into()]),
            ..Overrides::default()
        };
        let r = cfg.resolve(&o).unwrap();
        assert_eq!(r.amputation_config(), AmputationConfig::new(AmputationKind::MnarTails, 20.0, 2));
        assert_eq!(r.leakage, LeakageMode::TrainOnly);
        assert_eq!(r.strategies.len(), 1);
    }

    #[test]
    fn rate_bounds() {
        let cfg = RunConfig::from_json_str(r#"{"amputation":{"r":100}}"#).unwrap();
        assert!(cfg.resolve(&Overrides::default()).unwrap_err().0.starts_with("amputation.r"));
    }

    #[test]
    fn unknown_top_level_field() {
        assert!(RunConfig::from_json_str(r#"{"sed":1}"#).is_err());
    }
}
