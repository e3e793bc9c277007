//! Trained model bundles and their on-disk format.
//!
//! File layout: magic `RFND`, format version (u32 LE), header length (u64 LE),
//! a JSON header describing the configuration and every parameter store's
//! layout, then each store's values as f64 LE in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{AdversarialConfig, VariantSpec};
use crate::classifiers::{ClassifierConfig, ClassifierRole, MlpClassifier, TrainReport};
use crate::corpus::NewsArticle;
use crate::encoders::{EncoderConfig, EncoderStack, PretrainReport};
use crate::error::{Error, Result};
use crate::numerics::{ParamLayout, ParamStore};
use crate::rl_agent::{adapt, EpisodeLog, PolicyAgent, RlConfig};

pub const MAGIC: &[u8; 4] = b"RFND";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to train one variant from a training split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub encoder: EncoderConfig,
    pub classifier: ClassifierConfig,
    pub rl: RlConfig,
    pub adversarial: AdversarialConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.classifier.validate()?;
        self.rl.validate()
    }
}

/// Per-stage training curves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub pretrain: PretrainReport,
    pub fake_news: Option<TrainReport>,
    pub domain: Option<TrainReport>,
    /// Mean combined objective per adversarial epoch.
    pub adversarial: Vec<f64>,
    pub episodes: Vec<EpisodeLog>,
}

/// A frozen, trained variant. `domain` and `agent` are absent when the
/// variant does not use them or the training split had a single domain.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub variant: VariantSpec,
    /// Snapshot with the variant's flags already applied to `encoder`.
    pub config: PipelineConfig,
    pub seed: u64,
    pub encoders: EncoderStack,
    pub fake_news: MlpClassifier,
    pub domain: Option<MlpClassifier>,
    pub agent: Option<PolicyAgent>,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Bundle,
    Encoders,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: Kind,
    variant: VariantSpec,
    config: PipelineConfig,
    seed: u64,
    vocab_size: usize,
    users: usize,
    stores: Vec<StoreHeader>,
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    name: String,
    frozen: bool,
    layout: Vec<ParamLayout>,
}

const ENCODER_STORES: [&str; 4] = ["encoder.content", "encoder.comments", "encoder.interactions", "encoder.fusion"];

impl ModelBundle {
    pub fn representation_dim(&self) -> usize {
        self.encoders.representation_dim()
    }

    /// The representation `F` scores: E′, moved by the agent's greedy
    /// rollout when the bundle has an agent.
    pub fn representation(&self, article: &NewsArticle) -> Result<Vec<f64>> {
        let e = self.encoders.encode(article)?.e_prime;
        match &self.agent {
            Some(agent) => Ok(adapt(agent, &e, &self.fake_news, &self.config.rl)?.0),
            None => Ok(e),
        }
    }

    pub fn predict_proba(&self, article: &NewsArticle) -> Result<[f64; 2]> {
        self.fake_news.predict_proba(&self.representation(article)?)
    }

    /// Checks that a corpus with `vocab_size` tokens and `users` users can be
    /// scored by this bundle.
    pub fn check_compatible(&self, vocab_size: usize, users: usize) -> Result<()> {
        if vocab_size != self.encoders.vocab_size() || users != self.encoders.users() {
            return Err(Error::Dimension {
                op: "bundle vs corpus (vocabulary, users)",
                left: vec![self.encoders.vocab_size(), self.encoders.users()],
                right: vec![vocab_size, users],
            });
        }
        Ok(())
    }

    fn named_stores(&self) -> Vec<(&'static str, &ParamStore)> {
        let mut out: Vec<(&'static str, &ParamStore)> = ENCODER_STORES.into_iter().zip(self.encoders.stores()).collect();
        out.push(("fake_news", &self.fake_news.store));
        if let Some(d) = &self.domain {
            out.push(("domain", &d.store));
        }
        if let Some(a) = &self.agent {
            out.push(("agent", &a.store));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: Kind::Bundle,
            variant: self.variant,
            config: self.config.clone(),
            seed: self.seed,
            vocab_size: self.encoders.vocab_size(),
            users: self.encoders.users(),
            stores: Vec::new(),
        };
        encode(header, &self.named_stores())
    }

    /// Rebuilds the architecture from the header's configuration, then
    /// overwrites every store after checking its layout.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values) = decode(bytes, Kind::Bundle)?;
        let cfg = &header.config;
        let mut encoders = EncoderStack::new(&cfg.encoder, header.vocab_size, header.users, header.seed)?;
        let dim = encoders.representation_dim();
        let mut fake_news = MlpClassifier::new(ClassifierRole::FakeNews, dim, &cfg.classifier, header.seed)?;
        let has = |name: &str| header.stores.iter().any(|s| s.name == name);
        let mut domain = if has("domain") {
            Some(MlpClassifier::new(ClassifierRole::Domain, dim, &cfg.classifier, header.seed)?)
        } else {
            None
        };
        let mut agent = if has("agent") {
            Some(PolicyAgent::new(dim, &cfg.rl.hidden, header.seed)?)
        } else {
            None
        };

        let mut targets: Vec<(&str, &mut ParamStore)> = ENCODER_STORES.into_iter().zip(encoders.stores_mut()).collect();
        targets.push(("fake_news", &mut fake_news.store));
        if let Some(d) = domain.as_mut() {
            targets.push(("domain", &mut d.store));
        }
        if let Some(a) = agent.as_mut() {
            targets.push(("agent", &mut a.store));
        }
        restore(targets, &header.stores, &values)?;
        Ok(ModelBundle {
            variant: header.variant,
            config: header.config,
            seed: header.seed,
            encoders,
            fake_news,
            domain,
            agent,
        })
    }

    /// Writes to a sibling temporary file and renames it into place, so a
    /// crash never leaves a loadable partial bundle.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes a pretrained encoder stack on its own.
pub fn save_encoders(stack: &EncoderStack, seed: u64, path: &Path) -> Result<()> {
    let header = Header {
        kind: Kind::Encoders,
        variant: VariantSpec::default(),
        config: PipelineConfig {
            encoder: stack.config.clone(),
            ..PipelineConfig::default()
        },
        seed,
        vocab_size: stack.vocab_size(),
        users: stack.users(),
        stores: Vec::new(),
    };
    let stores: Vec<(&'static str, &ParamStore)> = ENCODER_STORES.into_iter().zip(stack.stores()).collect();
    write_atomic(path, &encode(header, &stores)?)
}

/// Reads an encoder stack written by [`save_encoders`]; returns it with its
/// seed.
pub fn load_encoders(path: &Path) -> Result<(EncoderStack, u64)> {
    let (header, values) = decode(&fs::read(path)?, Kind::Encoders)?;
    let mut stack = EncoderStack::new(&header.config.encoder, header.vocab_size, header.users, header.seed)?;
    let targets: Vec<(&str, &mut ParamStore)> = ENCODER_STORES.into_iter().zip(stack.stores_mut()).collect();
    restore(targets, &header.stores, &values)?;
    Ok((stack, header.seed))
}

fn encode(mut header: Header, stores: &[(&'static str, &ParamStore)]) -> Result<Vec<u8>> {
    header.stores = stores
        .iter()
        .map(|(name, s)| StoreHeader {
            name: name.to_string(),
            frozen: s.is_frozen(),
            layout: s.layout(),
        })
        .collect();
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, s) in stores {
        for v in s.flat_values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode(bytes: &[u8], kind: Kind) -> Result<(Header, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
    if header.kind != kind {
        return Err(Error::Format(match kind {
            Kind::Bundle => "file holds encoders only, not a model bundle".into(),
            Kind::Encoders => "file holds a model bundle, not an encoder stack".into(),
        }));
    }
    let payload = &bytes[header_end..];
    if payload.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64 values".into()));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

fn restore(targets: Vec<(&str, &mut ParamStore)>, entries: &[StoreHeader], values: &[f64]) -> Result<()> {
    if targets.len() != entries.len() {
        return Err(Error::Format(format!(
            "header lists {} stores, architecture has {}",
            entries.len(),
            targets.len()
        )));
    }
    let mut offset = 0;
    for ((name, store), entry) in targets.into_iter().zip(entries) {
        if entry.name != name {
            return Err(Error::Format(format!("expected store {name}, found {}", entry.name)));
        }
        if entry.layout != store.layout() {
            return Err(Error::Format(format!("layout of store {name} does not match its configuration")));
        }
        let n = store.num_scalars();
        let chunk = values
            .get(offset..offset + n)
            .ok_or_else(|| Error::Format(format!("truncated values for store {name}")))?;
        *store = ParamStore::from_layout(&entry.layout, chunk, entry.frozen)?;
        offset += n;
    }
    if offset != values.len() {
        return Err(Error::Format(format!("{} trailing values", values.len() - offset)));
    }
    Ok(())
}

/// Write-then-rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
