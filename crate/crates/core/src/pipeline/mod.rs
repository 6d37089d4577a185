//! The three-phase pipeline wired from an [`ExperimentConfig`].
//!
//! The functions here work in memory; [`run`] persists each phase into a
//! run directory.

mod config;
pub mod run;

pub use config::{
    DatasetConfig, DatasetKind, DiagnosticsConfig, DrsSettings, ExperimentConfig, MetricsConfig, TrainSettings,
};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::datasets::{GaussianMixtureSpec, Group, LabeledDataset};
use crate::diagnostics::{LdrLog, SamplingDistribution, ScoreTable};
use crate::drs::{self, DiscriminatorLdr, DrsOutcome, GeneratorSource};
use crate::error::{Error, Result};
use crate::gan::{self, CurvePoint, GanModel};
use crate::metrics::{self, AeConfig, FrechetResult, ModeCoverageReport};
use crate::rng;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Fresh model from the configured architecture and seed.
pub fn init_model(cfg: &ExperimentConfig) -> Result<GanModel> {
    GanModel::new(&cfg.architecture, cfg.train.loss, cfg.optimizer(), cfg.seed)
}

pub struct Phase1Result {
    pub dataset: LabeledDataset,
    pub model: GanModel,
    pub log: LdrLog,
    pub curve: Vec<CurvePoint>,
}

/// Builds the dataset and trains phase 1.
pub fn run_phase1(cfg: &ExperimentConfig) -> Result<Phase1Result> {
    cfg.validate()?;
    let dataset = cfg.build_dataset()?;
    let mut model = init_model(cfg)?;
    let out = gan::train_phase1(&mut model, &dataset, &cfg.train_config())?;
    Ok(Phase1Result { dataset, model, log: out.log, curve: out.curve })
}

/// Discrepancy scores from the last window of the log.
pub fn score(cfg: &ExperimentConfig, log: &LdrLog) -> Result<ScoreTable> {
    ScoreTable::from_log_with(log, cfg.diagnostics.k, cfg.diagnostics.window, &cfg.diagnostics.clip_rule())
}

/// Phase 2 with score-weighted minibatches.
pub fn run_phase2(
    cfg: &ExperimentConfig,
    model: &mut GanModel,
    dataset: &LabeledDataset,
    scores: &ScoreTable,
) -> Result<Vec<CurvePoint>> {
    let sampling = SamplingDistribution::new(&scores.p_s)?;
    gan::train_phase2(model, dataset, &sampling, &cfg.train_config())
}

/// Baseline: phase 2's steps with uniform minibatches and no auxiliary
/// discriminator.
pub fn run_vanilla(cfg: &ExperimentConfig, model: &mut GanModel, dataset: &LabeledDataset) -> Result<Vec<CurvePoint>> {
    gan::continue_uniform(model, dataset, &cfg.train_config())
}

/// Phase 3: rejection sampling from G with the auxiliary discriminator.
pub fn run_drs(cfg: &ExperimentConfig, model: &GanModel, n: usize) -> Result<DrsOutcome> {
    let aux = model
        .aux
        .as_ref()
        .ok_or_else(|| Error::Contract("rejection sampling needs the auxiliary discriminator".into()))?;
    let drs_cfg = cfg.drs.drs_config();
    let mut rng = rng::stream(cfg.seed, rng::streams::DRS);
    let source = GeneratorSource(&model.generator);
    let estimator = DiscriminatorLdr(aux);
    let mut state = drs::init_ldr_max(&source, &estimator, &drs_cfg, &mut rng)?;
    drs::sample_n(&source, &estimator, n, &mut state, &drs_cfg, &mut rng)
}

/// `n` plain generator samples from the evaluation stream.
pub fn sample_generator(cfg: &ExperimentConfig, model: &GanModel, n: usize) -> Result<Array2<f64>> {
    let mut rng = rng::stream(cfg.seed, rng::streams::EVAL);
    gan::generate(&model.generator, n, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecall {
    pub group: String,
    pub count: usize,
    pub partial_recall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub samples: usize,
    pub knn_k: usize,
    pub precision: f64,
    pub recall: f64,
    pub frechet: FrechetResult,
    pub groups: Vec<GroupRecall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_coverage: Option<ModeCoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes_covered: Option<usize>,
}

/// Scores generated `samples` against the training set. `log` adds per-mode
/// mean LDRM to the mode coverage of grid datasets.
pub fn evaluate(
    cfg: &ExperimentConfig,
    dataset: &LabeledDataset,
    log: Option<&LdrLog>,
    samples: ArrayView2<f64>,
) -> Result<EvaluationReport> {
    let k = cfg.metrics.knn_k;
    let real = dataset.points.view();
    let precision = metrics::precision(samples, real, k)?;
    let recall = metrics::recall(real, samples, k)?;
    let frechet = metrics::frechet_distance(real, samples)?;
    let ae = if cfg.metrics.re_score {
        let ae_cfg = AeConfig { epochs: cfg.metrics.ae_epochs, seed: cfg.seed, ..AeConfig::default() };
        Some(metrics::train_autoencoder(samples, &ae_cfg)?)
    } else {
        None
    };
    let mut groups = Vec::new();
    for group in [Group::Major, Group::Minor] {
        let idx = dataset.indices_of(group);
        if idx.is_empty() {
            continue;
        }
        let subset = dataset.subset(&idx);
        let re_score = ae.as_ref().map(|ae| metrics::reconstruction_error(ae, subset.view())).transpose()?;
        groups.push(GroupRecall {
            group: group.as_str().to_string(),
            count: idx.len(),
            partial_recall: metrics::partial_recall(subset.view(), samples, k)?,
            re_score,
        });
    }
    let (mode_coverage, modes_covered) = match (&dataset.modes, cfg.dataset.kind) {
        (Some(modes), DatasetKind::TwentyFive) => {
            let mut report = metrics::high_quality_counts(samples, &GaussianMixtureSpec::twenty_five())?;
            if let Some(log) = log {
                let ldrm: Vec<f64> =
                    log.last(cfg.diagnostics.window).statistics()?.into_iter().map(|(m, _)| m).collect();
                report = report.with_mean_ldrm(&ldrm, modes)?;
            }
            let covered = report.modes_covered(cfg.metrics.mode_threshold);
            (Some(report), Some(covered))
        }
        _ => (None, None),
    };
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        samples: samples.nrows(),
        knn_k: k,
        precision,
        recall,
        frechet,
        groups,
        mode_coverage,
        modes_covered,
    })
}
