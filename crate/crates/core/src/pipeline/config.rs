use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{self, LabeledDataset};
use crate::diagnostics::{ClipRule, DEFAULT_WINDOW};
use crate::drs::DrsConfig;
use crate::error::{Error, Result};
use crate::gan::{Architecture, GeneratorObjective, LossKind, TrainConfig, PHASE1_FRACTION};
use crate::metrics::DEFAULT_K;
use crate::numcore::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    SingleGaussian,
    TwentyFive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub size: usize,
    /// Standard deviation of the single-mode Gaussian; ignored for the grid.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Falls back to the experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_sigma() -> f64 {
    datasets::MINORITY_LEVEL_SIGMA[0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub epochs: u64,
    #[serde(default = "default_phase1_fraction")]
    pub phase1_fraction: f64,
    pub loss: LossKind,
    #[serde(default)]
    pub generator_objective: GeneratorObjective,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default)]
    pub lr_decay: bool,
}

fn default_phase1_fraction() -> f64 {
    PHASE1_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub k: f64,
    pub window: usize,
    #[serde(default = "default_clip_floor")]
    pub clip_floor: f64,
    #[serde(default = "default_clip_ratio")]
    pub clip_ratio: f64,
}

fn default_clip_floor() -> f64 {
    ClipRule::default().floor
}

fn default_clip_ratio() -> f64 {
    ClipRule::default().max_ratio
}

impl DiagnosticsConfig {
    pub fn clip_rule(&self) -> ClipRule {
        ClipRule { floor: self.clip_floor, max_ratio: self.clip_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrsSettings {
    /// Accepted samples to draw in phase 3.
    pub samples: usize,
    pub gamma_percentile: f64,
    pub epsilon: f64,
    pub init_count: usize,
    pub min_acceptance: f64,
    pub starvation_window: usize,
}

impl DrsSettings {
    pub fn drs_config(&self) -> DrsConfig {
        DrsConfig {
            epsilon: self.epsilon,
            init_count: self.init_count,
            gamma_percentile: self.gamma_percentile,
            min_acceptance: self.min_acceptance,
            starvation_window: self.starvation_window,
            ..DrsConfig::default()
        }
    }
}

impl Default for DrsSettings {
    fn default() -> Self {
        let d = DrsConfig::default();
        DrsSettings {
            samples: 10_000,
            gamma_percentile: d.gamma_percentile,
            epsilon: d.epsilon,
            init_count: d.init_count,
            min_acceptance: d.min_acceptance,
            starvation_window: d.starvation_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub knn_k: usize,
    /// A mode counts as covered with at least this many high-quality samples.
    pub mode_threshold: usize,
    #[serde(default)]
    pub re_score: bool,
    #[serde(default = "default_ae_epochs")]
    pub ae_epochs: usize,
}

fn default_ae_epochs() -> usize {
    200
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { knn_k: DEFAULT_K, mode_threshold: 50, re_score: false, ae_epochs: default_ae_epochs() }
    }
}

/// Everything needed to reproduce a run. Serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub architecture: Architecture,
    pub train: TrainSettings,
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub drs: DrsSettings,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl ExperimentConfig {
    /// 10,000 points from `N(0, σ²I)`, batch 1024, 200 epochs,
    /// Adam(1e-3, 0.5, 0.9).
    pub fn single_gaussian(sigma: f64, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            dataset: DatasetConfig { kind: DatasetKind::SingleGaussian, size: 10_000, sigma, seed: None },
            architecture: Architecture::default(),
            train: TrainSettings {
                batch_size: 1024,
                epochs: 200,
                phase1_fraction: PHASE1_FRACTION,
                loss: LossKind::NonSaturating,
                generator_objective: GeneratorObjective::Standard,
                lr: 1e-3,
                beta1: 0.5,
                beta2: 0.9,
                lr_decay: false,
            },
            diagnostics: DiagnosticsConfig {
                k: 3.0,
                window: DEFAULT_WINDOW,
                clip_floor: default_clip_floor(),
                clip_ratio: default_clip_ratio(),
            },
            drs: DrsSettings::default(),
            metrics: MetricsConfig::default(),
        }
    }

    /// 10,000 points from the 5×5 grid, batch 128, 300 epochs,
    /// Adam(2e-4, 0.5, 0.999).
    pub fn twenty_five(seed: u64) -> Self {
        let mut cfg = Self::single_gaussian(default_sigma(), seed);
        cfg.dataset = DatasetConfig { kind: DatasetKind::TwentyFive, size: 10_000, sigma: default_sigma(), seed: None };
        cfg.train.batch_size = 128;
        cfg.train.epochs = 300;
        cfg.train.lr = 2e-4;
        cfg.train.beta2 = 0.999;
        cfg
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "single_gaussian" | "single-gaussian" => Ok(Self::single_gaussian(default_sigma(), seed)),
            "twenty_five" | "twenty-five" | "25-gaussians" => Ok(Self::twenty_five(seed)),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Applies a `dotted.key=value` override; the value is parsed as a TOML
    /// value, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table =
                node.as_table_mut().ok_or_else(|| Error::Config(format!("`{key}` does not name a config table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let updated: ExperimentConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn dataset_seed(&self) -> u64 {
        self.dataset.seed.unwrap_or(self.seed)
    }

    pub fn build_dataset(&self) -> Result<LabeledDataset> {
        match self.dataset.kind {
            DatasetKind::SingleGaussian => {
                datasets::gen_single_gaussian(self.dataset.sigma, self.dataset.size, self.dataset_seed())
            }
            DatasetKind::TwentyFive => datasets::gen_25_gaussians(self.dataset.size, self.dataset_seed()),
        }
    }

    pub fn optimizer(&self) -> AdamConfig {
        AdamConfig::new(self.train.lr, self.train.beta1, self.train.beta2)
    }

    /// Step schedule: records every epoch over the last `window` epochs of
    /// phase 1.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let mut cfg = TrainConfig::from_epochs(
            self.dataset.size,
            t.batch_size,
            t.epochs,
            t.phase1_fraction,
            t.loss,
            self.optimizer(),
            self.seed,
        );
        cfg.generator_objective = t.generator_objective;
        cfg.lr_decay = t.lr_decay;
        cfg.record_start = cfg.phase1_steps.saturating_sub(self.diagnostics.window as u64 * cfg.record_interval);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.size == 0 {
            return Err(Error::Config("dataset size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.train.phase1_fraction) {
            return Err(Error::Config("phase-1 fraction must lie in [0, 1]".into()));
        }
        if !(self.dataset.sigma > 0.0 && self.dataset.sigma.is_finite()) {
            return Err(Error::Config("dataset sigma must be positive and finite".into()));
        }
        let t = &self.train;
        if !(t.lr.is_finite() && (0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2)) {
            return Err(Error::Config("Adam needs a finite learning rate and betas in [0, 1)".into()));
        }
        if !(self.diagnostics.k >= 0.0 && self.diagnostics.k.is_finite()) {
            return Err(Error::Config("k must be non-negative".into()));
        }
        if self.diagnostics.window < 2 {
            return Err(Error::Config("the LDR window needs at least two records".into()));
        }
        self.diagnostics.clip_rule().validate()?;
        let d = &self.drs;
        if !(d.gamma_percentile > 0.0 && d.gamma_percentile <= 1.0)
            || !(d.epsilon > 0.0 && d.epsilon.is_finite())
            || !(0.0..=1.0).contains(&d.min_acceptance)
            || d.starvation_window == 0
        {
            return Err(Error::Config("invalid DRS settings".into()));
        }
        if self.metrics.knn_k == 0 {
            return Err(Error::Config("k-NN rank must be positive".into()));
        }
        if self.architecture.latent_dim == 0 || self.architecture.hidden_width == 0 || self.architecture.data_dim != 2 {
            return Err(Error::Config("architecture needs positive widths and 2-D data".into()));
        }
        self.train_config().validate()
    }
}
