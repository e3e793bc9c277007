use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::{auc_score, f1_score, mean_std, FoldMetrics};
use crate::baselines::{build_variant, VariantSpec};
use crate::corpus::{split, Corpus, Fold, NewsArticle, SplitMode, SplitPlan};
use crate::error::{Error, Result};
use crate::pipeline::{write_atomic, ModelBundle, PipelineConfig};
use crate::seed::{derive_seed, stream};

/// Per-fold scores on one test set, with their mean and sample deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// E.g. `gossipcop→politifact`.
    pub protocol: String,
    pub variant: String,
    pub folds: Vec<FoldMetrics>,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

impl MetricReport {
    pub fn from_folds(protocol: String, variant: String, folds: Vec<FoldMetrics>) -> Self {
        let f1: Vec<f64> = folds.iter().map(|f| f.f1).collect();
        let auc: Vec<f64> = folds.iter().map(|f| f.auc).collect();
        let (f1_mean, f1_std) = mean_std(&f1);
        let (auc_mean, auc_std) = mean_std(&auc);
        MetricReport {
            protocol,
            variant,
            folds,
            f1_mean,
            f1_std,
            auc_mean,
            auc_std,
        }
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] over {} folds: F1 {:.4} ± {:.4}, AUC {:.4} ± {:.4}",
            self.protocol,
            self.variant,
            self.folds.len(),
            self.f1_mean,
            self.f1_std,
            self.auc_mean,
            self.auc_std
        )
    }
}

/// F1 of the predicted class and AUC of the fake-class probability.
pub fn score_bundle(bundle: &ModelBundle, articles: &[&NewsArticle]) -> Result<(f64, f64)> {
    let mut predictions = Vec::with_capacity(articles.len());
    let mut scores = Vec::with_capacity(articles.len());
    for a in articles {
        let p = bundle.predict_proba(a)?;
        predictions.push(usize::from(p[1] > p[0]));
        scores.push(p[1]);
    }
    let labels: Vec<usize> = articles.iter().map(|a| a.label.index()).collect();
    Ok((f1_score(&predictions, &labels)?, auc_score(&scores, &labels)?))
}

/// Seed for fold `f` of a run seeded with `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, stream::FOLD + fold as u64)
}

pub fn protocol_folds(corpus: &Corpus, mode: SplitMode, plan: &SplitPlan) -> Result<Vec<Fold>> {
    if mode == SplitMode::CrossDomain && !corpus.has_domain(crate::corpus::Domain::Target) {
        return Err(Error::Config("cross-domain mode needs a corpus with two domains".into()));
    }
    split(corpus, plan, mode)
}

/// Trains the whole pipeline from scratch on each fold's training split and
/// scores it on the held-out data.
///
/// Single-domain mode yields two reports, source held-out folds and the whole
/// other domain (the latter only when the corpus has one). Cross-domain mode
/// yields one report on the held-out target folds.
pub fn run_protocol(
    corpus: &Corpus,
    mode: SplitMode,
    variant: VariantSpec,
    config: &PipelineConfig,
    plan: &SplitPlan,
    seed: u64,
) -> Result<Vec<MetricReport>> {
    let folds = protocol_folds(corpus, mode, plan)?;
    let [source, target] = &corpus.domain_names;
    let mut held_out = Vec::with_capacity(folds.len());
    let mut other = Vec::with_capacity(folds.len());
    for fold in &folds {
        let articles = |idx: &[usize]| -> Vec<&NewsArticle> { idx.iter().map(|&i| &corpus.articles[i]).collect() };
        let train = articles(&fold.train);
        let (bundle, _) = build_variant(
            variant,
            &train,
            corpus.vocabulary.len(),
            corpus.user_count(),
            config,
            fold_seed(seed, fold.index),
        )?;
        let (f1, auc) = score_bundle(&bundle, &articles(&fold.test))?;
        info!("{} fold {}: F1 {f1:.4} AUC {auc:.4}", mode.as_str(), fold.index);
        held_out.push(FoldMetrics { fold: fold.index, f1, auc });
        if !fold.other_domain_test.is_empty() {
            let (f1, auc) = score_bundle(&bundle, &articles(&fold.other_domain_test))?;
            other.push(FoldMetrics { fold: fold.index, f1, auc });
        }
    }
    let name = variant.name();
    Ok(match mode {
        SplitMode::SingleDomain => {
            let mut out = vec![MetricReport::from_folds(format!("{source}→{source}"), name.clone(), held_out)];
            if !other.is_empty() {
                out.push(MetricReport::from_folds(format!("{source}→{target}"), name, other));
            }
            out
        }
        SplitMode::CrossDomain => vec![MetricReport::from_folds(format!("{source}→{target}"), name, held_out)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Alpha,
    Beta,
    Gamma,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Beta => "beta",
            SweepParameter::Gamma => "gamma",
        }
    }

    /// Largest admissible grid value.
    pub fn max(self) -> f64 {
        match self {
            SweepParameter::Gamma => 0.7,
            _ => 1.0,
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParameter::Alpha),
            "beta" => Ok(SweepParameter::Beta),
            "gamma" => Ok(SweepParameter::Gamma),
            _ => Err(Error::Config(format!("unknown sweep parameter {s:?}; expected alpha, beta or gamma"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

impl fmt::Display for SweepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8}  {:>8}  {:>8}", self.parameter.as_str(), "mean_f1", "std_f1")?;
        for p in &self.points {
            writeln!(f, "{:>8.3}  {:>8.4}  {:>8.4}", p.value, p.mean_f1, p.std_f1)?;
        }
        Ok(())
    }
}

/// Cross-domain target F1 for each grid value. Sweeping `alpha` fixes `beta`
/// at 0.5 and vice versa; sweeping `gamma` changes the split.
pub fn sweep(
    corpus: &Corpus,
    parameter: SweepParameter,
    grid: &[f64],
    variant: VariantSpec,
    config: &PipelineConfig,
    plan: &SplitPlan,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{} grid is empty", parameter.as_str())));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{} grid must be strictly ascending", parameter.as_str())));
    }
    if let Some(v) = grid.iter().find(|v| !(0.0..=parameter.max()).contains(*v)) {
        return Err(Error::Config(format!(
            "{} value {v} outside [0, {}]",
            parameter.as_str(),
            parameter.max()
        )));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut cfg = config.clone();
        let mut split_plan = *plan;
        match parameter {
            SweepParameter::Alpha => {
                cfg.rl.alpha = value;
                cfg.rl.beta = 0.5;
            }
            SweepParameter::Beta => {
                cfg.rl.alpha = 0.5;
                cfg.rl.beta = value;
            }
            SweepParameter::Gamma => split_plan.gamma = value,
        }
        let report = run_protocol(corpus, SplitMode::CrossDomain, variant, &cfg, &split_plan, seed)?;
        let r = &report[0];
        info!("sweep {}={value}: {r}", parameter.as_str());
        points.push(SweepPoint {
            value,
            mean_f1: r.f1_mean,
            std_f1: r.f1_std,
        });
    }
    Ok(SweepResult { parameter, points })
}

#[derive(Serialize)]
struct ReportRow<'a> {
    protocol: &'a str,
    fold: usize,
    f1: f64,
    auc: f64,
}

pub fn report_csv(reports: &[MetricReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for fold in &r.folds {
            w.serialize(ReportRow {
                protocol: &r.protocol,
                fold: fold.fold,
                f1: fold.f1,
                auc: fold.auc,
            })
            .map_err(csv_error)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn sweep_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &result.points {
        w.serialize(p).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `report.csv` in `dir`.
pub fn write_report(dir: &Path, reports: &[MetricReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("report.csv"), &report_csv(reports)?)
}

/// `sweep_<param>.csv` in `dir`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join(format!("sweep_{}.csv", result.parameter.as_str())), &sweep_csv(result)?)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
