use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::Vocab;
use crate::data::{Layout, LweParams, SecretDist};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::recovery::RecoveryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretKind {
    Binary,
    Uniform,
}

/// LWE instance parameters in a form that is easy to override key by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LweConfig {
    pub n: usize,
    pub q: u64,
    pub sigma: f64,
    pub secret: SecretKind,
    /// Exact Hamming weight; takes precedence over `density`.
    pub hamming: Option<usize>,
    pub density: Option<f64>,
    pub a_max_fraction: f64,
    pub layout: Layout,
}

impl Default for LweConfig {
    fn default() -> Self {
        Self {
            n: 16,
            q: 251,
            sigma: 3.0,
            secret: SecretKind::Binary,
            hamming: Some(2),
            density: None,
            a_max_fraction: 1.0,
            layout: Layout::Plain,
        }
    }
}

impl LweConfig {
    pub fn params(&self) -> Result<LweParams> {
        let secret = match (self.secret, self.hamming, self.density) {
            (SecretKind::Uniform, _, _) => SecretDist::Uniform,
            (SecretKind::Binary, Some(h), _) => SecretDist::Binary { hamming: h },
            (SecretKind::Binary, None, Some(d)) => SecretDist::BinaryDensity { density: d },
            (SecretKind::Binary, None, None) => {
                return Err(Error::Config(
                    "binary secrets need lwe.hamming or lwe.density".into(),
                ))
            }
        };
        Ok(LweParams::new(self.n, self.q, self.sigma, secret)?
            .with_a_max_fraction(self.a_max_fraction)?
            .with_layout(self.layout))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub base_in: u32,
    pub base_out: u32,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            base_in: 81,
            base_out: 81,
        }
    }
}

impl EncodingConfig {
    pub fn vocab(&self) -> Result<Vocab> {
        Ok(Vocab::new(self.base_in, self.base_out)?)
    }
}

/// How training rows are produced each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Passes over each epoch's fresh rows.
    pub reuse_limit: usize,
    /// Rows per combination; 0 disables combined rows.
    pub combine_k: usize,
    /// Combined rows added per epoch, built from that epoch's fresh rows.
    pub combined_per_epoch: usize,
    /// Uses per fresh row allowed while building combinations.
    pub combine_reuse_limit: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            reuse_limit: 1,
            combine_k: 0,
            combined_per_epoch: 0,
            combine_reuse_limit: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_epochs: usize,
    /// Distinct fresh training rows.
    pub max_samples: u64,
    pub wall_clock_secs: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            max_samples: 1 << 26,
            wall_clock_secs: 4.0 * 3600.0,
        }
    }
}

/// Lists of values to cross. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub n: Vec<usize>,
    pub q: Vec<u64>,
    pub density: Vec<f64>,
    pub hamming: Vec<usize>,
    pub base_in: Vec<u32>,
    pub base_out: Vec<u32>,
    pub a_max_fraction: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
            && self.q.is_empty()
            && self.density.is_empty()
            && self.hamming.is_empty()
            && self.base_in.is_empty()
            && self.base_out.is_empty()
            && self.a_max_fraction.is_empty()
            && self.sigma.is_empty()
            && self.seeds.is_empty()
    }
}

/// Stopping rule for standalone training tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub target_accuracy: f64,
    /// Epochs without a new best loss before giving up.
    pub plateau_epochs: usize,
    pub test_samples: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            target_accuracy: 0.95,
            plateau_epochs: 60,
            test_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lwe: LweConfig,
    pub encoding: EncodingConfig,
    pub model: ModelConfig,
    pub recovery: RecoveryConfig,
    pub data: DataConfig,
    pub budget: BudgetConfig,
    pub task: TaskConfig,
    pub sweep: SweepAxes,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `key=value` overrides with dotted keys, e.g. `lwe.n=30` or
    /// `sweep.q=[251,503]`. Values are TOML; bare words are taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.lwe.params()?;
        self.encoding.vocab()?;
        self.model.validate()?;
        self.recovery.validate()?;
        if self.budget.max_epochs == 0 || self.budget.max_samples == 0 {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if !(self.budget.wall_clock_secs > 0.0) {
            return Err(Error::Config("budget.wall_clock_secs must be positive".into()));
        }
        if self.data.reuse_limit == 0 || self.data.combine_reuse_limit == 0 {
            return Err(Error::Config("reuse limits must be positive".into()));
        }
        if self.data.combined_per_epoch > 0 && self.data.combine_k == 0 {
            return Err(Error::Config(
                "data.combined_per_epoch needs data.combine_k > 0".into(),
            ));
        }
        if !(self.task.target_accuracy > 0.0 && self.task.target_accuracy <= 1.0) {
            return Err(Error::Config("task.target_accuracy must lie in (0, 1]".into()));
        }
        if self.task.test_samples == 0 {
            return Err(Error::Config("task.test_samples must be positive".into()));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(Error::Config(format!("empty override key `{key}`")));
    };
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    // optional fields are absent from the serialized table, so a new key is fine here;
    // unknown keys are rejected when the table is deserialized
    cur.insert(last.to_string(), value);
    Ok(())
}
