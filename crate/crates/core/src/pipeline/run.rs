//! Run directories.
//!
//! Every command reads the artifacts of earlier phases and writes new files
//! next to them; existing artifacts are never overwritten. `manifest.json`
//! is the only file rewritten, and only to append entries.
//!
//! | file | written by |
//! |---|---|
//! | `config.toml`, `dataset.csv`, `ldr_log.csv`, `phase1_curve.csv`, `phase1.ckpt` | [`train`] |
//! | `scores.csv` | [`diagnose`] |
//! | `phase2_curve.csv`, `phase2.ckpt` | [`resample_train`] |
//! | `baseline_curve.csv`, `baseline.ckpt` | [`baseline`] |
//! | `samples.csv`, `drs_report.json` | [`drs`] |
//! | `<stem>.metrics.json`, `<stem>.partial_recall.csv`, `<stem>.mode_coverage.csv` | [`evaluate`] |
//! | `score_extremes.csv`, `radius_histogram.csv`, `report.json` | [`report`] |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{EvaluationReport, ExperimentConfig, REPORT_SCHEMA_VERSION};
use crate::bayes::{self, MinorLdrvReport};
use crate::datasets::{read_points_csv, write_points_csv, LabeledDataset};
use crate::diagnostics::{LdrLog, ScoreTable};
use crate::drs::DrsReport;
use crate::error::{Error, Result};
use crate::gan::{write_curve_csv, GanModel};
use crate::io::fmt_f64;
use crate::numcore::checkpoint::Checkpoint;

pub const CONFIG: &str = "config.toml";
pub const MANIFEST: &str = "manifest.json";
pub const DATASET: &str = "dataset.csv";
pub const LDR_LOG: &str = "ldr_log.csv";
pub const PHASE1_CURVE: &str = "phase1_curve.csv";
pub const PHASE1_CKPT: &str = "phase1.ckpt";
pub const SCORES: &str = "scores.csv";
pub const PHASE2_CURVE: &str = "phase2_curve.csv";
pub const PHASE2_CKPT: &str = "phase2.ckpt";
pub const BASELINE_CURVE: &str = "baseline_curve.csv";
pub const BASELINE_CKPT: &str = "baseline.ckpt";
pub const SAMPLES: &str = "samples.csv";
pub const DRS_REPORT: &str = "drs_report.json";
pub const SWEEP_TABLE: &str = "sweep.csv";
pub const REPORT: &str = "report.json";
pub const SCORE_EXTREMES: &str = "score_extremes.csv";
pub const RADIUS_HISTOGRAM: &str = "radius_histogram.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub name: String,
    pub start_step: u64,
    pub end_step: u64,
    /// Not reproducible; excluded from any byte-identity comparison.
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub phases: Vec<PhaseRecord>,
    pub checkpoints: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        RunManifest {
            schema_version: REPORT_SCHEMA_VERSION,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            phases: Vec::new(),
            checkpoints: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?)
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(MANIFEST))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn add_artifact(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
    }

    /// Names of listed artifacts missing from `dir`.
    pub fn missing(&self, dir: &Path) -> Vec<String> {
        self.artifacts.iter().chain(self.checkpoints.values()).filter(|a| !dir.join(a).exists()).cloned().collect()
    }
}

/// Creates `dir/name`, refusing to replace an existing file.
fn create_new(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::options().write(true).create_new(true).open(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Contract(format!("{} already exists; run directories are append-only", path.display()))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(BufWriter::new(file))
}

fn write_new(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create_new(dir, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_new(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// An opened run directory whose config matches its manifest.
pub struct Run {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: RunManifest,
}

impl Run {
    pub fn open(dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::load(&dir.join(CONFIG))?;
        let manifest = RunManifest::load(dir)?;
        if manifest.config_hash != config.hash() {
            return Err(Error::Contract(format!("{} does not match the manifest's config hash", CONFIG)));
        }
        Ok(Run { dir: dir.to_path_buf(), config, manifest })
    }

    pub fn dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::read_csv(File::open(self.dir.join(DATASET))?, self.config.dataset_seed())
    }

    pub fn ldr_log(&self) -> Result<LdrLog> {
        LdrLog::read_csv(File::open(self.dir.join(LDR_LOG))?)
    }

    pub fn model(&self, checkpoint: &str) -> Result<GanModel> {
        GanModel::from_checkpoint(&Checkpoint::load(self.dir.join(checkpoint))?)
    }

    fn record_phase(&mut self, name: &str, start: u64, end: u64, started: Instant) {
        self.manifest.phases.push(PhaseRecord {
            name: name.to_string(),
            start_step: start,
            end_step: end,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        });
    }

    fn save_checkpoint(&mut self, key: &str, name: &str, model: &GanModel) -> Result<()> {
        let bytes = model.to_checkpoint().encode();
        write_new(&self.dir, name, |w| Ok(w.write_all(&bytes)?))?;
        self.manifest.checkpoints.insert(key.to_string(), name.to_string());
        Ok(())
    }
}

/// Phase 1: writes the config, dataset, LDR log, training curve and the
/// end-of-phase checkpoint into a fresh directory.
pub fn train(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    if dir.join(MANIFEST).exists() {
        return Err(Error::Contract(format!("{} already holds a run", dir.display())));
    }
    let started = Instant::now();
    write_new(dir, CONFIG, |w| Ok(w.write_all(cfg.to_toml().as_bytes())?))?;
    let out = super::run_phase1(cfg)?;
    let mut run = Run { dir: dir.to_path_buf(), config: cfg.clone(), manifest: RunManifest::new(cfg) };
    write_new(dir, DATASET, |w| out.dataset.write_csv(w))?;
    write_new(dir, LDR_LOG, |w| out.log.write_csv(w))?;
    write_new(dir, PHASE1_CURVE, |w| write_curve_csv(&out.curve, w))?;
    run.save_checkpoint("phase1", PHASE1_CKPT, &out.model)?;
    for name in [CONFIG, DATASET, LDR_LOG, PHASE1_CURVE] {
        run.manifest.add_artifact(name);
    }
    run.record_phase("phase1", 0, out.model.step, started);
    run.manifest.save(dir)?;
    Ok(run.manifest)
}

/// Scores from the saved LDR log.
pub fn diagnose(dir: &Path) -> Result<ScoreTable> {
    let mut run = Run::open(dir)?;
    let started = Instant::now();
    let table = super::score(&run.config, &run.ldr_log()?)?;
    write_new(dir, SCORES, |w| table.write_csv(w))?;
    run.manifest.add_artifact(SCORES);
    run.record_phase("diagnose", 0, 0, started);
    run.manifest.save(dir)?;
    Ok(table)
}

/// Phase 2 from the phase-1 checkpoint with sampling probabilities from
/// `scores` (default `scores.csv`).
pub fn resample_train(dir: &Path, scores: Option<&Path>) -> Result<RunManifest> {
    let mut run = Run::open(dir)?;
    let started = Instant::now();
    let table = ScoreTable::read_csv(File::open(scores.map_or_else(|| dir.join(SCORES), Path::to_path_buf))?)?;
    let dataset = run.dataset()?;
    let mut model = run.model(PHASE1_CKPT)?;
    let start = model.step;
    let curve = super::run_phase2(&run.config, &mut model, &dataset, &table)?;
    write_new(dir, PHASE2_CURVE, |w| write_curve_csv(&curve, w))?;
    run.save_checkpoint("phase2", PHASE2_CKPT, &model)?;
    run.manifest.add_artifact(PHASE2_CURVE);
    run.record_phase("phase2", start, model.step, started);
    run.manifest.save(dir)?;
    Ok(run.manifest)
}

/// Baseline continuation of phase 1 with uniform minibatches.
pub fn baseline(dir: &Path) -> Result<RunManifest> {
    let mut run = Run::open(dir)?;
    let started = Instant::now();
    let dataset = run.dataset()?;
    let mut model = run.model(PHASE1_CKPT)?;
    let start = model.step;
    let curve = super::run_vanilla(&run.config, &mut model, &dataset)?;
    write_new(dir, BASELINE_CURVE, |w| write_curve_csv(&curve, w))?;
    run.save_checkpoint("baseline", BASELINE_CKPT, &model)?;
    run.manifest.add_artifact(BASELINE_CURVE);
    run.record_phase("baseline", start, model.step, started);
    run.manifest.save(dir)?;
    Ok(run.manifest)
}

/// Phase 3: `n` rejection-sampled points into `samples.csv` plus the
/// sampler report.
pub fn drs(dir: &Path, n: usize) -> Result<DrsReport> {
    let mut run = Run::open(dir)?;
    let started = Instant::now();
    let model = run.model(PHASE2_CKPT)?;
    let out = super::run_drs(&run.config, &model, n)?;
    let samples =
        if out.samples.nrows() == 0 { Array2::zeros((0, run.config.architecture.data_dim)) } else { out.samples };
    write_new(dir, SAMPLES, |w| write_points_csv(samples.view(), w))?;
    write_json(dir, DRS_REPORT, &out.report)?;
    run.manifest.add_artifact(SAMPLES);
    run.manifest.add_artifact(DRS_REPORT);
    run.record_phase("drs", model.step, model.step, started);
    run.manifest.save(dir)?;
    Ok(out.report)
}

/// `n` plain generator samples from a checkpoint of the run into `out`.
pub fn sample(dir: &Path, checkpoint: &str, n: usize, out: &str) -> Result<Array2<f64>> {
    let mut run = Run::open(dir)?;
    let model = run.model(checkpoint)?;
    let samples = super::sample_generator(&run.config, &model, n)?;
    write_new(dir, out, |w| write_points_csv(samples.view(), w))?;
    run.manifest.add_artifact(out);
    run.manifest.save(dir)?;
    Ok(samples)
}

fn stem(samples: &Path) -> String {
    samples.file_stem().and_then(|s| s.to_str()).unwrap_or("samples").to_string()
}

/// Metrics of a sample file against the run's dataset. Writes
/// `<stem>.metrics.json`, `<stem>.partial_recall.csv` (header
/// `group,count,partial_recall`) and, for the grid dataset,
/// `<stem>.mode_coverage.csv`.
pub fn evaluate(dir: &Path, samples: &Path) -> Result<EvaluationReport> {
    let mut run = Run::open(dir)?;
    let points = read_points_csv(File::open(samples)?)?;
    let dataset = run.dataset()?;
    let log = run.ldr_log()?;
    let log = (log.num_records() >= 2).then_some(log);
    let report = super::evaluate(&run.config, &dataset, log.as_ref(), points.view())?;
    let stem = stem(samples);
    let metrics = format!("{stem}.metrics.json");
    write_json(dir, &metrics, &report)?;
    let recall = format!("{stem}.partial_recall.csv");
    write_new(dir, &recall, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["group", "count", "partial_recall"])?;
        for g in &report.groups {
            c.write_record([g.group.clone(), g.count.to_string(), fmt_f64(g.partial_recall)])?;
        }
        c.flush()?;
        Ok(())
    })?;
    run.manifest.add_artifact(&metrics);
    run.manifest.add_artifact(&recall);
    if let Some(cov) = &report.mode_coverage {
        let name = format!("{stem}.mode_coverage.csv");
        write_new(dir, &name, |w| cov.write_csv(w))?;
        run.manifest.add_artifact(&name);
    }
    run.manifest.save(dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub frechet: f64,
    pub precision: f64,
    pub recall: f64,
    pub modes_covered: Option<usize>,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSort {
    Frechet,
    Precision,
    Recall,
    ModesCovered,
}

impl std::str::FromStr for SweepSort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frechet" => Ok(SweepSort::Frechet),
            "precision" => Ok(SweepSort::Precision),
            "recall" => Ok(SweepSort::Recall),
            "modes" | "modes_covered" => Ok(SweepSort::ModesCovered),
            other => Err(Error::Config(format!("unknown sort key `{other}`"))),
        }
    }
}

/// Orders rows best first: smallest Fréchet distance, largest otherwise.
pub fn sort_sweep(rows: &mut [SweepRow], key: SweepSort) {
    match key {
        SweepSort::Frechet => rows.sort_by(|a, b| a.frechet.total_cmp(&b.frechet)),
        SweepSort::Precision => rows.sort_by(|a, b| b.precision.total_cmp(&a.precision)),
        SweepSort::Recall => rows.sort_by(|a, b| b.recall.total_cmp(&a.recall)),
        SweepSort::ModesCovered => rows.sort_by_key(|r| std::cmp::Reverse(r.modes_covered)),
    }
}

fn link_or_copy(from: &Path, to: &Path) -> Result<()> {
    if fs::hard_link(from, to).is_err() {
        fs::copy(from, to)?;
    }
    Ok(())
}

/// Trains phase 1 once in `dir`, then runs diagnose → phase 2 → DRS →
/// evaluate for every `k` in its own `k_<k>` subdirectory. Writes
/// `sweep.csv` with header `k,frechet,precision,recall,modes_covered,acceptance_rate`.
pub fn sweep(cfg: &ExperimentConfig, dir: &Path, ks: &[f64], sort: Option<SweepSort>) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::Parameter("empty k list".into()));
    }
    train(cfg, dir)?;
    let parent = RunManifest::load(dir)?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut sub_cfg = cfg.clone();
        sub_cfg.diagnostics.k = k;
        sub_cfg.validate()?;
        let sub = dir.join(format!("k_{}", fmt_f64(k)));
        fs::create_dir_all(&sub)?;
        write_new(&sub, CONFIG, |w| Ok(w.write_all(sub_cfg.to_toml().as_bytes())?))?;
        for name in [DATASET, LDR_LOG, PHASE1_CURVE, PHASE1_CKPT] {
            link_or_copy(&dir.join(name), &sub.join(name))?;
        }
        let mut manifest = parent.clone();
        manifest.config_hash = sub_cfg.hash();
        manifest.save(&sub)?;
        diagnose(&sub)?;
        resample_train(&sub, None)?;
        let report = drs(&sub, sub_cfg.drs.samples)?;
        let eval = evaluate(&sub, &sub.join(SAMPLES))?;
        rows.push(SweepRow {
            k,
            frechet: eval.frechet.distance,
            precision: eval.precision,
            recall: eval.recall,
            modes_covered: eval.modes_covered,
            acceptance_rate: report.acceptance_rate,
        });
    }
    if let Some(key) = sort {
        sort_sweep(&mut rows, key);
    }
    write_new(dir, SWEEP_TABLE, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["k", "frechet", "precision", "recall", "modes_covered", "acceptance_rate"])?;
        for r in &rows {
            c.write_record([
                fmt_f64(r.k),
                fmt_f64(r.frechet),
                fmt_f64(r.precision),
                fmt_f64(r.recall),
                r.modes_covered.map(|m| m.to_string()).unwrap_or_default(),
                fmt_f64(r.acceptance_rate),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let mut manifest = RunManifest::load(dir)?;
    manifest.add_artifact(SWEEP_TABLE);
    manifest.save(dir)?;
    Ok(rows)
}

/// Number of lowest- and highest-scoring training points listed in the
/// score extremes table.
pub const EXTREMES: usize = 100;
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub phases: Vec<PhaseRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drs: Option<DrsReport>,
    pub evaluations: BTreeMap<String, EvaluationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ldrv_study: Option<MinorLdrvReport>,
}

/// Collects everything a run has produced into `report.json`. With scores
/// present it also writes the lowest/highest-scoring training points
/// (`score_extremes.csv`, header `rank_group,index,x,y,score`) and a
/// histogram of their distances from the origin against generated samples
/// (`radius_histogram.csv`, header `bin_low,bin_high,lowest,highest,generated`).
pub fn report(dir: &Path) -> Result<RunReport> {
    let mut run = Run::open(dir)?;
    let dataset = run.dataset()?;
    let drs = match File::open(dir.join(DRS_REPORT)) {
        Ok(f) => Some(serde_json::from_reader(BufReader::new(f))?),
        Err(_) => None,
    };
    let mut evaluations = BTreeMap::new();
    for name in &run.manifest.artifacts {
        if let Some(stem) = name.strip_suffix(".metrics.json") {
            let r: EvaluationReport = serde_json::from_reader(BufReader::new(File::open(dir.join(name))?))?;
            evaluations.insert(stem.to_string(), r);
        }
    }
    let log = run.ldr_log()?;
    let study = if run.config.train.loss == crate::gan::LossKind::NonSaturating
        && !dataset.indices_of(crate::datasets::Group::Minor).is_empty()
        && !dataset.indices_of(crate::datasets::Group::Major).is_empty()
        && log.num_records() >= 2
    {
        let model = run.model(PHASE1_CKPT)?;
        Some(bayes::minor_ldrv_study(
            &dataset,
            &log,
            &model.discriminator,
            run.config.diagnostics.window,
            bayes::DEFAULT_PRIOR_VARIANCE,
        )?)
    } else {
        None
    };
    if dir.join(SCORES).exists() {
        let scores = ScoreTable::read_csv(File::open(dir.join(SCORES))?)?;
        let generated = File::open(dir.join(SAMPLES)).ok().map(read_points_csv).transpose()?;
        write_extremes(&run, &dataset, &scores, generated.as_ref())?;
        run.manifest.add_artifact(SCORE_EXTREMES);
        run.manifest.add_artifact(RADIUS_HISTOGRAM);
    }
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: run.manifest.config_hash.clone(),
        seed: run.manifest.seed,
        phases: run.manifest.phases.clone(),
        drs,
        evaluations,
        ldrv_study: study,
    };
    write_json(dir, REPORT, &report)?;
    run.manifest.add_artifact(REPORT);
    run.manifest.save(dir)?;
    Ok(report)
}

fn write_extremes(
    run: &Run,
    dataset: &LabeledDataset,
    scores: &ScoreTable,
    generated: Option<&Array2<f64>>,
) -> Result<()> {
    if scores.len() != dataset.len() {
        return Err(Error::Shape(format!("{} scores for {} points", scores.len(), dataset.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores.raw[a].total_cmp(&scores.raw[b]).then(a.cmp(&b)));
    let m = EXTREMES.min(order.len());
    let lowest = &order[..m];
    let highest = &order[order.len() - m..];
    write_new(&run.dir, SCORE_EXTREMES, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["rank_group", "index", "x", "y", "score"])?;
        for (label, idx) in [("lowest", lowest), ("highest", highest)] {
            for &i in idx {
                let p = dataset.points.row(i);
                c.write_record([
                    label.to_string(),
                    i.to_string(),
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(scores.raw[i]),
                ])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    let radius = |p: ndarray::ArrayView1<f64>| p.dot(&p).sqrt();
    let low_r: Vec<f64> = lowest.iter().map(|&i| radius(dataset.points.row(i))).collect();
    let high_r: Vec<f64> = highest.iter().map(|&i| radius(dataset.points.row(i))).collect();
    let gen_r: Vec<f64> = generated.map(|g| g.axis_iter(Axis(0)).take(m).map(radius).collect()).unwrap_or_default();
    let top = low_r.iter().chain(&high_r).chain(&gen_r).copied().fold(0.0, f64::max);
    let width = if top > 0.0 { top / HISTOGRAM_BINS as f64 } else { 1.0 };
    let count = |rs: &[f64], b: usize| {
        rs.iter().filter(|&&r| ((r / width) as usize).min(HISTOGRAM_BINS - 1) == b).count().to_string()
    };
    write_new(&run.dir, RADIUS_HISTOGRAM, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["bin_low", "bin_high", "lowest", "highest", "generated"])?;
        for b in 0..HISTOGRAM_BINS {
            c.write_record([
                fmt_f64(b as f64 * width),
                fmt_f64((b + 1) as f64 * width),
                count(&low_r, b),
                count(&high_r, b),
                count(&gen_r, b),
            ])?;
        }
        c.flush()?;
        Ok(())
    })
}
