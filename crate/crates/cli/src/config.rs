use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unigraph::data::synth::{synth_cycles_vs_cliques, synth_stars_vs_paths};
use unigraph::data::tu::load_tu;
use unigraph::data::Dataset;
use unigraph::encoder::EncoderConfig;
use unigraph::kernels::KernelConfig;
use unigraph::train::TrainConfig;

use crate::CliError;

/// Everything a run needs, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `train.seed`; every random draw of a run derives from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub kernel: KernelConfig,
    pub datasets: Vec<DatasetSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: "runs".into(),
            cache_dir: "kernel-cache".into(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            kernel: KernelConfig::default(),
            datasets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    CyclesVsCliques,
    StarsVsPaths,
}

/// A dataset read from TU benchmark files (`path` names the directory and
/// `name` the file prefix) or produced by a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_sizes")]
    pub sizes: (usize, usize),
    #[serde(default)]
    pub generator_seed: u64,
}

fn default_count() -> usize {
    200
}

fn default_sizes() -> (usize, usize) {
    (4, 12)
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset, CliError> {
        let mut ds = match (&self.path, self.generator) {
            (Some(dir), None) => load_tu(dir, &self.name)?,
            (None, Some(Generator::CyclesVsCliques)) => {
                synth_cycles_vs_cliques(self.count, self.sizes, self.generator_seed)
            }
            (None, Some(Generator::StarsVsPaths)) => synth_stars_vs_paths(self.count, self.sizes, self.generator_seed),
            _ => unreachable!("checked by RunConfig::validate"),
        };
        ds.name = self.name.clone();
        Ok(ds)
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides with dotted keys, then the seed flag.
    pub fn resolve(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::msg(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::msg(format!("config {}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::msg(format!("config: {}", e.message())))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.encoder.validate()?;
        self.train.validate()?;
        self.kernel.validate()?;
        let mut names = std::collections::BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return Err(CliError::msg(format!("dataset `{}` is listed twice", d.name)));
            }
            match (&d.path, d.generator) {
                (Some(p), None) if !p.is_dir() => {
                    return Err(CliError::msg(format!(
                        "dataset `{}`: directory {} does not exist",
                        d.name,
                        p.display()
                    )))
                }
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(CliError::msg(format!(
                        "dataset `{}` needs exactly one of `path` and `generator`",
                        d.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetSpec, CliError> {
        self.datasets.iter().find(|d| d.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
            CliError::msg(format!(
                "no dataset `{name}` in the config (known: {})",
                known.join(", ")
            ))
        })
    }

    /// The named datasets, or all of them when `names` is empty.
    pub fn select(&self, names: &[String]) -> Result<Vec<&DatasetSpec>, CliError> {
        if names.is_empty() {
            if self.datasets.is_empty() {
                return Err(CliError::msg("the config lists no datasets"));
            }
            return Ok(self.datasets.iter().collect());
        }
        names.iter().map(|n| self.dataset(n)).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::msg(format!("override `{spec}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::msg(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// A TOML literal when the text parses as one, a string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
