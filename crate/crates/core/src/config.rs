//! Run configuration read from JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AdversarialConfig, VariantSpec};
use crate::classifiers::ClassifierConfig;
use crate::corpus::{generate_synthetic, ingest_jsonl, Corpus, SplitMode, SplitPlan, SyntheticConfig};
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::rl_agent::RlConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSource {
    Synthetic(SyntheticConfig),
    Jsonl {
        path: PathBuf,
        /// Domain name treated as the source; the first one in the file by
        /// default.
        #[serde(default)]
        source_domain: Option<String>,
    },
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticConfig::default())
    }
}

impl CorpusSource {
    pub fn load(&self) -> Result<Corpus> {
        match self {
            CorpusSource::Synthetic(cfg) => generate_synthetic(cfg),
            CorpusSource::Jsonl { path, source_domain } => ingest_jsonl(path, source_domain.as_deref()),
        }
    }
}

/// Sweep grids; each must be sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrids {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for SweepGrids {
    fn default() -> Self {
        let unit: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        SweepGrids {
            alpha: unit.clone(),
            beta: unit,
            gamma: (0..=7).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSource,
    pub encoder: EncoderConfig,
    pub classifier: ClassifierConfig,
    pub rl: RlConfig,
    pub adversarial: AdversarialConfig,
    /// Cross-domain folds and target portion.
    pub split: SplitPlan,
    pub single_domain_folds: usize,
    pub mode: SplitMode,
    pub variant: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sweep: SweepGrids,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: CorpusSource::default(),
            encoder: EncoderConfig::default(),
            classifier: ClassifierConfig::default(),
            rl: RlConfig::default(),
            adversarial: AdversarialConfig::default(),
            split: SplitPlan::default(),
            single_domain_folds: 9,
            mode: SplitMode::CrossDomain,
            variant: "real-fnd".into(),
            seed: 1,
            output_dir: PathBuf::from("runs"),
            sweep: SweepGrids::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            encoder: self.encoder.clone(),
            classifier: self.classifier.clone(),
            rl: self.rl.clone(),
            adversarial: self.adversarial.clone(),
        }
    }

    pub fn variant_spec(&self) -> Result<VariantSpec> {
        self.variant.parse()
    }

    /// The split plan for `mode`: the single-domain fold count replaces `k`.
    pub fn split_for(&self, mode: SplitMode) -> SplitPlan {
        match mode {
            SplitMode::SingleDomain => SplitPlan {
                k: self.single_domain_folds,
                ..self.split
            },
            SplitMode::CrossDomain => self.split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        self.variant_spec()?;
        for (name, grid) in [("alpha", &self.sweep.alpha), ("beta", &self.sweep.beta), ("gamma", &self.sweep.gamma)] {
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("sweep.{name} grid must be strictly ascending")));
            }
        }
        Ok(())
    }
}
